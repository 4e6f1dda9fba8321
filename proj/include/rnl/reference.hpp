#pragma once

#include "rnl/blocks.hpp"

namespace rnl::reference {

// Direct per-position loops over the block definitions. Slow (O(P^2 C)) and
// independent of the matrix path, which makes them a cross-check for it.
struct LoopOutput {
  Tensor<double> affinity;  // (P, P) normalized weights, empty for SE
  Tensor<double> y;         // (P, c/r) attention-weighted sum, empty for SE
  FeatureClip<double> z;
};

LoopOutput rnl_loop(const FeatureClip<double>& x, const BlockConfig<double>& cfg);
LoopOutput nl_loop(const FeatureClip<double>& x, const BlockConfig<double>& cfg);
FeatureClip<double> se_loop(const FeatureClip<double>& x, const BlockConfig<double>& cfg);

// Dispatch on cfg.kind; a chain runs se_loop then rnl_loop.
LoopOutput block_loop(const FeatureClip<double>& x, const BlockConfig<double>& cfg);

}  // namespace rnl::reference
