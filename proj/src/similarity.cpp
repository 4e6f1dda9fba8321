#include "rnl/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "rnl/ops.hpp"

namespace rnl {

std::string to_string(SimilarityForm form) {
  switch (form) {
    case SimilarityForm::gaussian:
      return "gaussian";
    case SimilarityForm::dot:
      return "dot";
    case SimilarityForm::cosine:
      return "cosine";
  }
  return "?";
}

SimilarityForm parse_similarity_form(const std::string& token) {
  if (token == "gaussian") return SimilarityForm::gaussian;
  if (token == "dot" || token == "dot-product") return SimilarityForm::dot;
  if (token == "cosine") return SimilarityForm::cosine;
  throw ArgumentError("unknown similarity form '" + token + "' (expected gaussian|dot|cosine)");
}

template <typename T>
AffinityMatrix<T> affinity(const Tensor<T>& e, SimilarityForm form) {
  if (e.rank() != 2) throw DimensionError("affinity needs a (P, C) embedding, got " + to_string(e.shape()));
  if (!all_finite(e)) throw ArgumentError("affinity embedding contains non-finite values");
  const std::size_t p = e.extent(0), c = e.extent(1);

  // Pairwise inner products, computed once per unordered pair so the raw
  // matrix is exactly symmetric.
  Tensor<T> w({p, p});
  std::vector<double> norms(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const T* ei = e.data().data() + i * c;
    for (std::size_t j = i; j < p; ++j) {
      const T* ej = e.data().data() + j * c;
      double acc = 0.0;
      for (std::size_t k = 0; k < c; ++k) acc += static_cast<double>(ei[k]) * ej[k];
      if (i == j) norms[i] = std::sqrt(acc);
      if (form == SimilarityForm::cosine) continue;
      w[i * p + j] = static_cast<T>(acc);
      w[j * p + i] = static_cast<T>(acc);
    }
  }
  if (form == SimilarityForm::cosine) {
    for (std::size_t i = 0; i < p; ++i) {
      const T* ei = e.data().data() + i * c;
      for (std::size_t j = i; j < p; ++j) {
        double cosv = 0.0;
        if (norms[i] >= kCosineZeroNorm && norms[j] >= kCosineZeroNorm) {
          const T* ej = e.data().data() + j * c;
          double acc = 0.0;
          for (std::size_t k = 0; k < c; ++k) acc += (ei[k] / norms[i]) * (ej[k] / norms[j]);
          cosv = std::min(1.0, std::max(0.0, acc));
        }
        w[i * p + j] = static_cast<T>(cosv);
        w[j * p + i] = static_cast<T>(cosv);
      }
    }
  }
  debug_check_finite(w, "affinity");
  return {std::move(w), false, form};
}

template <typename T>
AffinityMatrix<T> normalize(const AffinityMatrix<T>& a) {
  if (a.normalized) throw ContractError("affinity matrix is already normalized");
  if (a.form == SimilarityForm::gaussian) return {softmax_rows(a.w), true, a.form};
  Tensor<T> w = a.w;
  const auto p = static_cast<T>(a.positions());
  for (auto& v : w.data()) v /= p;
  return {std::move(w), true, a.form};
}

template <typename T>
FeatureClip<T> attention_row(const AffinityMatrix<T>& a, std::size_t i, const std::array<std::size_t, 3>& dims) {
  const std::size_t p = a.positions();
  if (dims[0] * dims[1] * dims[2] != p) {
    throw DimensionError("dims " + to_string(Shape{dims[0], dims[1], dims[2]}) + " do not cover " +
                         std::to_string(p) + " positions");
  }
  if (i >= p) {
    throw ArgumentError("reference position " + std::to_string(i) + " out of range [0, " + std::to_string(p) + ")");
  }
  std::vector<T> row(a.w.data().begin() + static_cast<std::ptrdiff_t>(i * p),
                     a.w.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * p));
  return FeatureClip<T>(Tensor<T>({dims[0], dims[1], dims[2], 1}, std::move(row)));
}

template AffinityMatrix<float> affinity(const Tensor<float>&, SimilarityForm);
template AffinityMatrix<double> affinity(const Tensor<double>&, SimilarityForm);
template AffinityMatrix<float> normalize(const AffinityMatrix<float>&);
template AffinityMatrix<double> normalize(const AffinityMatrix<double>&);
template FeatureClip<float> attention_row(const AffinityMatrix<float>&, std::size_t, const std::array<std::size_t, 3>&);
template FeatureClip<double> attention_row(const AffinityMatrix<double>&, std::size_t,
                                           const std::array<std::size_t, 3>&);

}  // namespace rnl
