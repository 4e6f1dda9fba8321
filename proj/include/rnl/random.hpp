#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rnl/tensor.hpp"

namespace rnl {

// Seeded generator. std::mt19937_64's output sequence is fixed by the
// standard and the float mapping below uses only raw bits, so a seed yields
// the same values on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Independent child stream, e.g. one per parameter tensor.
  Rng fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 engine_;
};

template <typename T>
Tensor<T> random_uniform(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
template <typename T>
Tensor<T> init_weights(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return random_uniform<T>(std::move(shape), rng, -bound, bound);
}

}  // namespace rnl
