#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rnl/tensor.hpp"

namespace rnl {

enum class AggregationMode { channelwise_conv, avg_pool, max_pool };

std::string to_string(AggregationMode mode);
AggregationMode parse_aggregation_mode(const std::string& token);

// Geometry of the cuboid region N_i: odd extents so the region is centered.
struct KernelGeometry {
  std::size_t kt = 3;
  std::size_t kh = 7;
  std::size_t kw = 7;

  std::size_t volume() const noexcept { return kt * kh * kw; }
  void validate() const;

  bool operator==(const KernelGeometry&) const = default;
};

// Region aggregation F_theta. In conv mode `weights` has shape (kt,kh,kw,c)
// and is shared by every position; pool modes carry no weights.
template <typename T>
struct RegionKernel {
  KernelGeometry geometry;
  AggregationMode mode = AggregationMode::channelwise_conv;
  std::optional<Tensor<T>> weights;
  std::optional<Tensor<T>> bias;

  static RegionKernel pooling(KernelGeometry g, AggregationMode mode) { return {g, mode, std::nullopt, std::nullopt}; }
  static RegionKernel conv(KernelGeometry g, Tensor<T> weights, std::optional<Tensor<T>> bias = std::nullopt) {
    return {g, AggregationMode::channelwise_conv, std::move(weights), std::move(bias)};
  }

  void validate(std::optional<std::size_t> channels = std::nullopt) const;
};

// Stride 1, zero padding of k/2 per axis; output shape equals input shape.
// Average pooling divides by the full kernel volume. Max pooling considers
// only in-bounds cells.
template <typename T>
FeatureClip<T> aggregate(const FeatureClip<T>& x, const RegionKernel<T>& k);

// Max pooling that also reports, per output element, the flat input offset of
// the first maximal cell in (kt,kh,kw) scan order.
template <typename T>
FeatureClip<T> max_pool_with_argmax(const FeatureClip<T>& x, const KernelGeometry& g,
                                    std::vector<std::size_t>& argmax);

// Channel-wise convolution parameter count: c*kt*kh*kw (+c with bias); pools add none.
std::size_t kernel_param_count(const KernelGeometry& g, AggregationMode mode, std::size_t channels,
                               bool with_bias = false);

template <typename T>
std::size_t kernel_param_count(const RegionKernel<T>& k, std::size_t channels) {
  return kernel_param_count(k.geometry, k.mode, channels, k.bias.has_value());
}

}  // namespace rnl
