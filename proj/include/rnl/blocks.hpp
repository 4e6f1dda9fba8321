#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rnl/aggregation.hpp"
#include "rnl/ops.hpp"
#include "rnl/similarity.hpp"
#include "rnl/tensor.hpp"

namespace rnl {

enum class BlockKind { nl, rnl, se, chain };

std::string to_string(BlockKind kind);
BlockKind parse_block_kind(const std::string& token);

// Weight layout follows conv1x1: a projection is stored as (cin, cout) and
// applied to row vectors. SE's w1/w2 keep the column-vector layout
// w1: (c/r, c), w2: (c, c/r) and are applied as s' * w1^T, h * w2^T.
template <typename T>
struct RnlParams {
  Tensor<T> w_g;  // (c, c/r)
  Tensor<T> w_z;  // (c/r, c)
  RegionKernel<T> kernel;
  std::optional<BatchNormParams<T>> residual_bn;
};

template <typename T>
struct NlParams {
  Tensor<T> w_theta;  // (c, c/r)
  Tensor<T> w_phi;    // (c, c/r)
  Tensor<T> w_g;      // (c, c/r)
  Tensor<T> w_z;      // (c/r, c)
  std::optional<BatchNormParams<T>> residual_bn;
};

template <typename T>
struct SeParams {
  Tensor<T> w1;             // (c/r, c)
  BatchNormParams<T> bn;    // over c/r
  Tensor<T> w2;             // (c, c/r)
};

template <typename T>
struct BlockConfig {
  BlockKind kind = BlockKind::rnl;
  std::size_t channels = 0;
  std::size_t reduction = 2;
  SimilarityForm form = SimilarityForm::gaussian;
  std::optional<RnlParams<T>> rnl;
  std::optional<NlParams<T>> nl;
  std::optional<SeParams<T>> se;

  std::size_t bottleneck() const { return channels / reduction; }
  void validate() const;
};

// Mutable views of a block's learnable tensors in a fixed order:
//   se:  se.w1, se.bn.gamma, se.bn.beta, se.w2
//   rnl: rnl.w_g, rnl.w_z, [rnl.kernel.u], [rnl.kernel.bias], [rnl.bn.gamma, rnl.bn.beta]
//   nl:  nl.w_theta, nl.w_phi, nl.w_g, nl.w_z, [nl.bn.gamma, nl.bn.beta]
//   chain: the se list followed by the rnl list.
template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> named_parameters(BlockConfig<T>& cfg);

// Everything needed to build a block with seeded weights.
struct BlockOptions {
  BlockKind kind = BlockKind::rnl;
  std::size_t channels = 0;
  std::size_t reduction = 2;
  SimilarityForm form = SimilarityForm::gaussian;
  KernelGeometry kernel{3, 7, 7};
  AggregationMode mode = AggregationMode::channelwise_conv;
  bool kernel_bias = false;
  // Batch norm after W_z on the residual path. gamma starts at bn_gamma; the
  // default 0 makes a freshly inserted block an exact identity.
  bool residual_bn = true;
  double bn_gamma = 0.0;
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn from `seed`.
template <typename T>
BlockConfig<T> make_block(const BlockOptions& options, std::uint64_t seed);

template <typename T>
struct BlockOutput {
  FeatureClip<T> z;
  std::optional<AffinityMatrix<T>> affinity;
  std::optional<Tensor<T>> se_vector;  // s, shape (1, c)
  std::optional<Tensor<T>> y;          // attention-weighted sum, shape (P, c/r)
};

template <typename T>
BlockOutput<T> rnl_forward(const FeatureClip<T>& x, const BlockConfig<T>& cfg);

template <typename T>
BlockOutput<T> nl_forward(const FeatureClip<T>& x, const BlockConfig<T>& cfg);

// Per-channel mean over all positions, shape (1, c).
template <typename T>
Tensor<T> se_squeeze(const FeatureClip<T>& x);

template <typename T>
BlockOutput<T> se_forward(const FeatureClip<T>& x, const BlockConfig<T>& cfg);

template <typename T>
BlockOutput<T> chain_forward(const FeatureClip<T>& x, const BlockConfig<T>& se_cfg, const BlockConfig<T>& rnl_cfg);

// Dispatch on cfg.kind. A chain config carries both se and rnl parameters.
template <typename T>
BlockOutput<T> block_forward(const FeatureClip<T>& x, const BlockConfig<T>& cfg);

// Splits a chain config into its SE and RNL halves.
template <typename T>
std::pair<BlockConfig<T>, BlockConfig<T>> split_chain(const BlockConfig<T>& cfg);

struct ShiftFraction {
  std::size_t num = 1;
  std::size_t den = 4;
};

// Shifts the first c*f/2 channels forward one frame (out[t] = in[t-1]) and the
// next c*f/2 backward (out[t] = in[t+1]), zero-filling at the clip ends.
template <typename T>
FeatureClip<T> temporal_shift(const FeatureClip<T>& x, ShiftFraction fraction = {});

// Number of channels moved in each direction.
std::size_t shifted_channels(std::size_t channels, ShiftFraction fraction);

// Attention map of reference position (t,h,w) from a block output.
template <typename T>
FeatureClip<T> attention_map(const BlockOutput<T>& out, const std::array<std::size_t, 3>& ref);

}  // namespace rnl
