#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "rnl/tensor.hpp"

namespace rnl {

enum class SimilarityForm { gaussian, dot, cosine };

std::string to_string(SimilarityForm form);
SimilarityForm parse_similarity_form(const std::string& token);

// Pairwise weights w[i][j] over the P = T*H*W positions.
//
// Before normalization a gaussian matrix holds the raw logits e_i . e_j; the
// exponential and the row sum are applied together by normalize() as a
// stable row softmax. Dot holds e_i . e_j and cosine holds
// ReLU(cos(e_i, e_j)); both are divided by P on normalization.
template <typename T>
struct AffinityMatrix {
  Tensor<T> w;
  bool normalized = false;
  SimilarityForm form = SimilarityForm::gaussian;

  std::size_t positions() const { return w.extent(0); }
};

// Rows of `e` whose norm is below this are treated as zero vectors by the
// cosine form: they are unrelated to everything, themselves included.
inline constexpr double kCosineZeroNorm = 1e-12;

template <typename T>
AffinityMatrix<T> affinity(const Tensor<T>& e, SimilarityForm form);

template <typename T>
AffinityMatrix<T> normalize(const AffinityMatrix<T>& a);

// Row i of a normalized affinity reshaped to (T,H,W,1): the attention map of
// reference position i.
template <typename T>
FeatureClip<T> attention_row(const AffinityMatrix<T>& a, std::size_t i, const std::array<std::size_t, 3>& dims);

}  // namespace rnl
