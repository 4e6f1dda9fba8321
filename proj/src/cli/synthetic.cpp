#include "rnl/cli/synthetic.hpp"

#include <algorithm>
#include <cstdlib>

#include "rnl/random.hpp"

namespace rnl::cli {

namespace {

long wrap(long v, long n) { return ((v % n) + n) % n; }

// Shortest distance between a and b on a ring of n cells.
long ring_distance(long a, long b, long n) {
  const long d = std::labs(a - b) % n;
  return std::min(d, n - d);
}

}  // namespace

std::array<long, 2> dot_centre(const SyntheticSpec& spec, std::size_t t) {
  const long h = static_cast<long>(spec.shape[1]), w = static_cast<long>(spec.shape[2]);
  const std::array<long, 2> start = spec.start.value_or(std::array<long, 2>{h / 4, w / 4});
  const long tt = static_cast<long>(t);
  return {wrap(start[0] + spec.velocity[0] * tt, h), wrap(start[1] + spec.velocity[1] * tt, w)};
}

SyntheticClip generate_clip(const SyntheticSpec& spec, std::uint64_t seed) {
  const auto [T, H, W, C] = spec.shape;
  SyntheticClip out{FeatureClip<double>(T, H, W, C), {}};
  Rng rng(seed);
  switch (spec.pattern) {
    case Pattern::random:
      out.clip = FeatureClip<double>(random_uniform<double>({T, H, W, C}, rng));
      break;
    case Pattern::constant:
      out.clip = FeatureClip<double>(T, H, W, C, spec.value);
      break;
    case Pattern::moving_dot: {
      // One positive feature vector shared by every dot cell, small noise elsewhere.
      Rng feature_rng = rng.fork();
      std::vector<double> feature(C);
      for (double& f : feature) f = spec.amplitude * (0.5 + 0.5 * feature_rng.uniform());
      Rng noise_rng = rng.fork();
      out.mask.assign(T * H * W, 0);
      const double r2 = spec.radius * spec.radius;
      for (std::size_t t = 0; t < T; ++t) {
        const auto centre = dot_centre(spec, t);
        for (std::size_t h = 0; h < H; ++h) {
          for (std::size_t w = 0; w < W; ++w) {
            const double dh = static_cast<double>(ring_distance(static_cast<long>(h), centre[0], static_cast<long>(H)));
            const double dw = static_cast<double>(ring_distance(static_cast<long>(w), centre[1], static_cast<long>(W)));
            const bool on = dh * dh + dw * dw <= r2;
            out.mask[(t * H + h) * W + w] = on ? 1 : 0;
            for (std::size_t c = 0; c < C; ++c) {
              const double noise = spec.noise * noise_rng.uniform(-1.0, 1.0);
              out.clip.at(t, h, w, c) = (on ? feature[c] : 0.0) + noise;
            }
          }
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace rnl::cli
