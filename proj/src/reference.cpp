#include "rnl/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace rnl::reference {

namespace {

using Vec = std::vector<double>;

Vec project(const FeatureClip<double>& x, std::size_t i, const Tensor<double>& w) {
  const std::size_t cin = w.extent(0), cout = w.extent(1);
  Vec out(cout, 0.0);
  for (std::size_t k = 0; k < cout; ++k) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cin; ++c) acc += x.tensor()[i * cin + c] * w.at(c, k);
    out[k] = acc;
  }
  return out;
}

double dot(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

// theta(N_i) for every position, straight from the window definition.
std::vector<Vec> region_embeddings(const std::vector<Vec>& g, std::size_t T, std::size_t H, std::size_t W,
                                   const RegionKernel<double>& k) {
  const KernelGeometry& geo = k.geometry;
  const long rt = static_cast<long>(geo.kt / 2), rh = static_cast<long>(geo.kh / 2), rw = static_cast<long>(geo.kw / 2);
  const std::size_t cr = g.front().size();
  std::vector<Vec> e(g.size(), Vec(cr, 0.0));
  for (long t = 0; t < static_cast<long>(T); ++t) {
    for (long h = 0; h < static_cast<long>(H); ++h) {
      for (long w = 0; w < static_cast<long>(W); ++w) {
        Vec& out = e[static_cast<std::size_t>((t * static_cast<long>(H) + h) * static_cast<long>(W) + w)];
        for (std::size_t c = 0; c < cr; ++c) {
          double acc = 0.0;
          double best = -std::numeric_limits<double>::infinity();
          for (long dt = -rt; dt <= rt; ++dt) {
            for (long dh = -rh; dh <= rh; ++dh) {
              for (long dw = -rw; dw <= rw; ++dw) {
                const long tt = t + dt, hh = h + dh, ww = w + dw;
                if (tt < 0 || hh < 0 || ww < 0 || tt >= static_cast<long>(T) || hh >= static_cast<long>(H) ||
                    ww >= static_cast<long>(W)) {
                  continue;
                }
                const double v =
                    g[static_cast<std::size_t>((tt * static_cast<long>(H) + hh) * static_cast<long>(W) + ww)][c];
                if (k.mode == AggregationMode::channelwise_conv) {
                  const std::size_t u =
                      ((static_cast<std::size_t>(dt + rt) * geo.kh + static_cast<std::size_t>(dh + rh)) * geo.kw +
                       static_cast<std::size_t>(dw + rw)) *
                          cr +
                      c;
                  acc += (*k.weights)[u] * v;
                } else {
                  acc += v;
                  best = std::max(best, v);
                }
              }
            }
          }
          switch (k.mode) {
            case AggregationMode::channelwise_conv:
              out[c] = acc + (k.bias ? (*k.bias)[c] : 0.0);
              break;
            case AggregationMode::avg_pool:
              out[c] = acc / static_cast<double>(geo.volume());
              break;
            case AggregationMode::max_pool:
              out[c] = best;
              break;
          }
        }
      }
    }
  }
  return e;
}

// z_i = BN(y_i W_z) + x_i
FeatureClip<double> residual(const FeatureClip<double>& x, const Tensor<double>& y, const Tensor<double>& w_z,
                             const std::optional<BatchNormParams<double>>& bn) {
  FeatureClip<double> z = x;
  const std::size_t c = x.c(), cr = w_z.extent(0);
  for (std::size_t i = 0; i < x.positions(); ++i) {
    for (std::size_t o = 0; o < c; ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < cr; ++k) acc += y.at(i, k) * w_z.at(k, o);
      if (bn) acc = bn->gamma[o] * (acc - bn->mean[o]) / std::sqrt(bn->var[o] + bn->eps) + bn->beta[o];
      z.at(i / (x.h() * x.w()), (i / x.w()) % x.h(), i % x.w(), o) += acc;
    }
  }
  return z;
}

// Weighted sum y_i = sum_j f(i,j) g_j / C_i given an unnormalized f.
LoopOutput weighted_sum(const std::vector<Vec>& f_rows, const std::vector<double>& norms, const std::vector<Vec>& g) {
  const std::size_t p = g.size(), cr = g.front().size();
  LoopOutput out{Tensor<double>({p, p}), Tensor<double>({p, cr}), FeatureClip<double>(1, 1, 1, 1)};
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double wij = f_rows[i][j] / norms[i];
      out.affinity.at(i, j) = wij;
      for (std::size_t k = 0; k < cr; ++k) out.y.at(i, k) += wij * g[j][k];
    }
  }
  return out;
}

}  // namespace

LoopOutput rnl_loop(const FeatureClip<double>& x, const BlockConfig<double>& cfg) {
  cfg.validate();
  if (!cfg.rnl) throw ArgumentError("rnl_loop needs rnl parameters");
  if (x.c() != cfg.channels) throw DimensionError("rnl_loop: channel mismatch");
  const RnlParams<double>& p = *cfg.rnl;
  const std::size_t n = x.positions();
  std::vector<Vec> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = project(x, i, p.w_g);
  const std::vector<Vec> e = region_embeddings(g, x.t(), x.h(), x.w(), p.kernel);

  std::vector<Vec> f(n, Vec(n, 0.0));
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    switch (cfg.form) {
      case SimilarityForm::gaussian: {
        // Shifting every logit in a row by its maximum cancels in the ratio.
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) m = std::max(m, dot(e[i], e[j]));
        for (std::size_t j = 0; j < n; ++j) {
          f[i][j] = std::exp(dot(e[i], e[j]) - m);
          norms[i] += f[i][j];
        }
        break;
      }
      case SimilarityForm::dot:
        for (std::size_t j = 0; j < n; ++j) f[i][j] = dot(e[i], e[j]);
        norms[i] = static_cast<double>(n);
        break;
      case SimilarityForm::cosine: {
        const double ni = std::sqrt(dot(e[i], e[i]));
        for (std::size_t j = 0; j < n; ++j) {
          const double nj = std::sqrt(dot(e[j], e[j]));
          if (ni < kCosineZeroNorm || nj < kCosineZeroNorm) continue;
          f[i][j] = std::clamp(dot(e[i], e[j]) / (ni * nj), 0.0, 1.0);
        }
        norms[i] = static_cast<double>(n);
        break;
      }
    }
  }
  LoopOutput out = weighted_sum(f, norms, g);
  out.z = residual(x, out.y, p.w_z, p.residual_bn);
  return out;
}

LoopOutput nl_loop(const FeatureClip<double>& x, const BlockConfig<double>& cfg) {
  cfg.validate();
  if (!cfg.nl) throw ArgumentError("nl_loop needs nl parameters");
  if (x.c() != cfg.channels) throw DimensionError("nl_loop: channel mismatch");
  const NlParams<double>& p = *cfg.nl;
  const std::size_t n = x.positions();
  std::vector<Vec> theta(n), phi(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] = project(x, i, p.w_theta);
    phi[i] = project(x, i, p.w_phi);
    g[i] = project(x, i, p.w_g);
  }
  std::vector<Vec> f(n, Vec(n, 0.0));
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) m = std::max(m, dot(theta[i], phi[j]));
    for (std::size_t j = 0; j < n; ++j) {
      f[i][j] = std::exp(dot(theta[i], phi[j]) - m);
      norms[i] += f[i][j];
    }
  }
  LoopOutput out = weighted_sum(f, norms, g);
  out.z = residual(x, out.y, p.w_z, p.residual_bn);
  return out;
}

FeatureClip<double> se_loop(const FeatureClip<double>& x, const BlockConfig<double>& cfg) {
  cfg.validate();
  if (!cfg.se) throw ArgumentError("se_loop needs se parameters");
  if (x.c() != cfg.channels) throw DimensionError("se_loop: channel mismatch");
  const SeParams<double>& p = *cfg.se;
  const std::size_t c = x.c(), cr = cfg.bottleneck(), n = x.positions();
  Vec squeezed(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) squeezed[k] += x.tensor()[i * c + k];
  }
  for (double& v : squeezed) v /= static_cast<double>(n);
  Vec hidden(cr, 0.0);
  for (std::size_t r = 0; r < cr; ++r) {
    double acc = 0.0;
    for (std::size_t k = 0; k < c; ++k) acc += p.w1.at(r, k) * squeezed[k];
    acc = p.bn.gamma[r] * (acc - p.bn.mean[r]) / std::sqrt(p.bn.var[r] + p.bn.eps) + p.bn.beta[r];
    hidden[r] = std::max(acc, 0.0);
  }
  FeatureClip<double> z = x;
  for (std::size_t k = 0; k < c; ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < cr; ++r) s += p.w2.at(k, r) * hidden[r];
    for (std::size_t i = 0; i < n; ++i) z.at(i / (x.h() * x.w()), (i / x.w()) % x.h(), i % x.w(), k) += s;
  }
  return z;
}

LoopOutput block_loop(const FeatureClip<double>& x, const BlockConfig<double>& cfg) {
  switch (cfg.kind) {
    case BlockKind::rnl:
      return rnl_loop(x, cfg);
    case BlockKind::nl:
      return nl_loop(x, cfg);
    case BlockKind::se:
      return {Tensor<double>(), Tensor<double>(), se_loop(x, cfg)};
    case BlockKind::chain: {
      auto [se_cfg, rnl_cfg] = split_chain(cfg);
      return rnl_loop(se_loop(x, se_cfg), rnl_cfg);
    }
  }
  throw ArgumentError("unknown block kind");
}

}  // namespace rnl::reference
