#pragma once

#include <optional>

#include "rnl/tensor.hpp"

namespace rnl {

// Primitive numeric operations. All reductions accumulate in double regardless
// of the storage type, in a fixed sequential order.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a);

// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a);

template <typename T>
Tensor<T> relu(const Tensor<T>& a);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T k);

// Elementwise with broadcasting: equal ranks, and along each axis the extents
// are equal or one of them is 1.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b);

Shape broadcast_shape(const Shape& a, const Shape& b);

template <typename T>
double sum(const Tensor<T>& a);

// 1x1x1 convolution: per-position product of the channel vector with w[cin,cout].
template <typename T>
FeatureClip<T> conv1x1(const FeatureClip<T>& x, const Tensor<T>& w,
                       const std::optional<Tensor<T>>& bias = std::nullopt);

template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> mean;
  Tensor<T> var;
  double eps = 1e-5;

  std::size_t channels() const { return gamma.size(); }

  // gamma = fill_gamma, beta = 0, mean = 0, var = 1.
  static BatchNormParams identity(std::size_t c, T fill_gamma = T(1), double eps = 1e-5) {
    return {Tensor<T>({c}, fill_gamma), Tensor<T>({c}, T(0)), Tensor<T>({c}, T(0)), Tensor<T>({c}, T(1)), eps};
  }
};

// Normalizes along the last axis of any tensor.
template <typename T>
Tensor<T> batch_norm_inference(const Tensor<T>& x, const BatchNormParams<T>& bn);

template <typename T>
FeatureClip<T> batch_norm_inference(const FeatureClip<T>& x, const BatchNormParams<T>& bn) {
  return FeatureClip<T>(batch_norm_inference(x.tensor(), bn));
}

}  // namespace rnl
