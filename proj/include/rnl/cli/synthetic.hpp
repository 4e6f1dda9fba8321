#pragma once

#include <cstdint>
#include <vector>

#include "rnl/cli/config.hpp"
#include "rnl/tensor.hpp"

namespace rnl::cli {

struct SyntheticClip {
  FeatureClip<double> clip;
  // Moving-dot ground truth: 1 where the dot covers (t,h,w), row-major over
  // T*H*W. Empty for the other patterns.
  std::vector<std::uint8_t> mask;
};

// Fully determined by (spec, seed).
SyntheticClip generate_clip(const SyntheticSpec& spec, std::uint64_t seed);

// Dot centre in frame t, wrapped onto the H x W torus.
std::array<long, 2> dot_centre(const SyntheticSpec& spec, std::size_t t);

}  // namespace rnl::cli
