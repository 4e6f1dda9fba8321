#include "rnl/aggregation.hpp"

#include <limits>

namespace rnl {

std::string to_string(AggregationMode mode) {
  switch (mode) {
    case AggregationMode::channelwise_conv:
      return "conv";
    case AggregationMode::avg_pool:
      return "avg";
    case AggregationMode::max_pool:
      return "max";
  }
  return "?";
}

AggregationMode parse_aggregation_mode(const std::string& token) {
  if (token == "conv" || token == "channelwise" || token == "channel-wise-conv") {
    return AggregationMode::channelwise_conv;
  }
  if (token == "avg" || token == "avg-pool" || token == "average") return AggregationMode::avg_pool;
  if (token == "max" || token == "max-pool") return AggregationMode::max_pool;
  throw ArgumentError("unknown aggregation mode '" + token + "' (expected conv|avg|max)");
}

void KernelGeometry::validate() const {
  for (std::size_t e : {kt, kh, kw}) {
    if (e == 0 || e % 2 == 0) {
      throw ArgumentError("kernel extents must be odd and positive, got " + rnl::to_string(Shape{kt, kh, kw}));
    }
  }
}

template <typename T>
void RegionKernel<T>::validate(std::optional<std::size_t> channels) const {
  geometry.validate();
  if (mode != AggregationMode::channelwise_conv) return;
  if (!weights) throw ArgumentError("channel-wise conv kernel needs weights");
  const Shape& s = weights->shape();
  if (s.size() != 4 || s[0] != geometry.kt || s[1] != geometry.kh || s[2] != geometry.kw) {
    throw DimensionError("kernel weights " + rnl::to_string(s) + " do not match geometry " +
                         rnl::to_string(Shape{geometry.kt, geometry.kh, geometry.kw}));
  }
  if (channels && s[3] != *channels) {
    throw DimensionError("kernel weights have " + std::to_string(s[3]) + " channels, input has " +
                         std::to_string(*channels));
  }
  if (bias && bias->size() != s[3]) {
    throw DimensionError("kernel bias " + rnl::to_string(bias->shape()) + " does not match " +
                         std::to_string(s[3]) + " channels");
  }
}

namespace {

// Calls visit(src_offset, kernel_index) for every in-bounds cell of the window
// centred at (t,h,w), in (kt,kh,kw) scan order. Offsets are at channel 0.
template <typename T, typename Visit>
void for_each_in_window(const FeatureClip<T>& x, const KernelGeometry& g, std::size_t t, std::size_t h,
                        std::size_t w, Visit&& visit) {
  const auto rt = static_cast<std::ptrdiff_t>(g.kt / 2);
  const auto rh = static_cast<std::ptrdiff_t>(g.kh / 2);
  const auto rw = static_cast<std::ptrdiff_t>(g.kw / 2);
  const auto T_ = static_cast<std::ptrdiff_t>(x.t());
  const auto H_ = static_cast<std::ptrdiff_t>(x.h());
  const auto W_ = static_cast<std::ptrdiff_t>(x.w());
  std::size_t kidx = 0;
  for (std::ptrdiff_t dt = -rt; dt <= rt; ++dt) {
    const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t) + dt;
    for (std::ptrdiff_t dh = -rh; dh <= rh; ++dh) {
      const std::ptrdiff_t sh = static_cast<std::ptrdiff_t>(h) + dh;
      for (std::ptrdiff_t dw = -rw; dw <= rw; ++dw, ++kidx) {
        const std::ptrdiff_t sw = static_cast<std::ptrdiff_t>(w) + dw;
        if (st < 0 || st >= T_ || sh < 0 || sh >= H_ || sw < 0 || sw >= W_) continue;
        visit(x.offset(static_cast<std::size_t>(st), static_cast<std::size_t>(sh), static_cast<std::size_t>(sw), 0),
              kidx);
      }
    }
  }
}

}  // namespace

template <typename T>
FeatureClip<T> max_pool_with_argmax(const FeatureClip<T>& x, const KernelGeometry& g,
                                    std::vector<std::size_t>& argmax) {
  g.validate();
  const std::size_t c = x.c();
  FeatureClip<T> out(x.t(), x.h(), x.w(), c);
  argmax.assign(x.tensor().size(), 0);
  std::vector<double> best(c);
  std::vector<std::size_t> where(c);
  const auto& in = x.tensor();
  for (std::size_t t = 0; t < x.t(); ++t)
    for (std::size_t h = 0; h < x.h(); ++h)
      for (std::size_t w = 0; w < x.w(); ++w) {
        std::fill(best.begin(), best.end(), -std::numeric_limits<double>::infinity());
        for_each_in_window(x, g, t, h, w, [&](std::size_t src, std::size_t) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            // Strict comparison keeps the first maximum on ties.
            if (in[src + ch] > best[ch]) {
              best[ch] = in[src + ch];
              where[ch] = src + ch;
            }
          }
        });
        const std::size_t base = out.offset(t, h, w, 0);
        for (std::size_t ch = 0; ch < c; ++ch) {
          out.at(t, h, w, ch) = static_cast<T>(best[ch]);
          argmax[base + ch] = where[ch];
        }
      }
  return out;
}

template <typename T>
FeatureClip<T> aggregate(const FeatureClip<T>& x, const RegionKernel<T>& k) {
  k.validate(x.c());
  if (k.mode == AggregationMode::max_pool) {
    std::vector<std::size_t> argmax;
    return max_pool_with_argmax(x, k.geometry, argmax);
  }
  const std::size_t c = x.c();
  const auto& in = x.tensor();
  FeatureClip<T> out(x.t(), x.h(), x.w(), c);
  std::vector<double> acc(c);
  const bool conv = k.mode == AggregationMode::channelwise_conv;
  const double inv_volume = 1.0 / static_cast<double>(k.geometry.volume());
  for (std::size_t t = 0; t < x.t(); ++t)
    for (std::size_t h = 0; h < x.h(); ++h)
      for (std::size_t w = 0; w < x.w(); ++w) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for_each_in_window(x, k.geometry, t, h, w, [&](std::size_t src, std::size_t kidx) {
          if (conv) {
            const T* u = k.weights->data().data() + kidx * c;
            for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += static_cast<double>(u[ch]) * in[src + ch];
          } else {
            for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += in[src + ch];
          }
        });
        for (std::size_t ch = 0; ch < c; ++ch) {
          double v = conv ? acc[ch] : acc[ch] * inv_volume;
          if (conv && k.bias) v += (*k.bias)[ch];
          out.at(t, h, w, ch) = static_cast<T>(v);
        }
      }
  debug_check_finite(out.tensor(), "aggregate");
  return out;
}

std::size_t kernel_param_count(const KernelGeometry& g, AggregationMode mode, std::size_t channels,
                               bool with_bias) {
  g.validate();
  if (mode != AggregationMode::channelwise_conv) return 0;
  return channels * g.volume() + (with_bias ? channels : 0);
}

template struct RegionKernel<float>;
template struct RegionKernel<double>;
template FeatureClip<float> aggregate(const FeatureClip<float>&, const RegionKernel<float>&);
template FeatureClip<double> aggregate(const FeatureClip<double>&, const RegionKernel<double>&);
template FeatureClip<float> max_pool_with_argmax(const FeatureClip<float>&, const KernelGeometry&,
                                                 std::vector<std::size_t>&);
template FeatureClip<double> max_pool_with_argmax(const FeatureClip<double>&, const KernelGeometry&,
                                                  std::vector<std::size_t>&);

}  // namespace rnl
