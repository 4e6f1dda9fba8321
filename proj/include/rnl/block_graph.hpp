#pragma once

#include <span>
#include <vector>

#include "rnl/autodiff.hpp"
#include "rnl/blocks.hpp"
#include "rnl/gradcheck.hpp"

namespace rnl {

// Copies of the block's differentiable parameters, ordered as named_parameters().
std::vector<autodiff::NamedTensor> block_parameters(const BlockConfig<double>& cfg);

// Records the block's forward map on the tape. `x` is a rank-4 node and
// `params` holds one node per entry of block_parameters(cfg), in order.
// Returns the output node z.
autodiff::NodeId record_block(autodiff::Tape& tape, autodiff::NodeId x, const BlockConfig<double>& cfg,
                              std::span<const autodiff::NodeId> params);

// Sets the residual batch norm's running mean to 0 and its running variance
// to the per-channel mean square of y W_z over the positions of `x`. The
// normalized residual then has unit RMS whatever the block's raw output
// magnitude. Blocks without a residual batch norm are left unchanged.
void calibrate_residual_bn(BlockConfig<double>& cfg, const FeatureClip<double>& x);

}  // namespace rnl
