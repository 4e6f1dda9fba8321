#include "rnl/autodiff.hpp"

#include <cmath>

#include "rnl/similarity.hpp"

namespace rnl::autodiff {

std::string to_string(OpKind op) {
  switch (op) {
    case OpKind::leaf: return "leaf";
    case OpKind::constant: return "constant";
    case OpKind::matmul: return "matmul";
    case OpKind::transpose: return "transpose";
    case OpKind::softmax_rows: return "softmax_rows";
    case OpKind::relu: return "relu";
    case OpKind::add: return "add";
    case OpKind::hadamard: return "hadamard";
    case OpKind::scale: return "scale";
    case OpKind::sum: return "sum";
    case OpKind::reshape: return "reshape";
    case OpKind::conv1x1: return "conv1x1";
    case OpKind::channelwise_conv: return "channelwise_conv";
    case OpKind::avg_pool: return "avg_pool";
    case OpKind::max_pool: return "max_pool";
    case OpKind::batch_norm: return "batch_norm";
    case OpKind::row_normalize: return "row_normalize";
    case OpKind::mean_rows: return "mean_rows";
    case OpKind::temporal_shift: return "temporal_shift";
    case OpKind::opaque: return "opaque";
  }
  return "?";
}

namespace {

using DTensor = Tensor<double>;

// Sums `g` over the axes along which `target` was broadcast.
DTensor reduce_to(const DTensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  const std::size_t rank = target.size();
  DTensor out(target, 0.0);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < rank; ++k) o = o * target[k] + (target[k] == 1 ? 0 : idx[k]);
    out[o] += g[i];
    for (std::size_t k = rank; k-- > 0;) {
      if (++idx[k] < g.extent(k)) break;
      idx[k] = 0;
    }
  }
  return out;
}

void require_rank(const DTensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + " needs a rank-" + std::to_string(rank) + " tensor, got " +
                         rnl::to_string(t.shape()));
  }
}

// Visits in-bounds window cells of output position `out_pos` (channel-0
// offsets) with their kernel index, in (kt,kh,kw) scan order.
template <typename Visit>
void for_each_window(const Shape& s, const KernelGeometry& g, Visit&& visit) {
  const auto T_ = static_cast<std::ptrdiff_t>(s[0]), H_ = static_cast<std::ptrdiff_t>(s[1]),
             W_ = static_cast<std::ptrdiff_t>(s[2]);
  const std::size_t c = s[3];
  const auto rt = static_cast<std::ptrdiff_t>(g.kt / 2), rh = static_cast<std::ptrdiff_t>(g.kh / 2),
             rw = static_cast<std::ptrdiff_t>(g.kw / 2);
  for (std::ptrdiff_t t = 0; t < T_; ++t)
    for (std::ptrdiff_t h = 0; h < H_; ++h)
      for (std::ptrdiff_t w = 0; w < W_; ++w) {
        const auto out_off = static_cast<std::size_t>((t * H_ + h) * W_ + w) * c;
        std::size_t kidx = 0;
        for (std::ptrdiff_t dt = -rt; dt <= rt; ++dt)
          for (std::ptrdiff_t dh = -rh; dh <= rh; ++dh)
            for (std::ptrdiff_t dw = -rw; dw <= rw; ++dw, ++kidx) {
              const std::ptrdiff_t st = t + dt, sh = h + dh, sw = w + dw;
              if (st < 0 || st >= T_ || sh < 0 || sh >= H_ || sw < 0 || sw >= W_) continue;
              visit(out_off, static_cast<std::size_t>((st * H_ + sh) * W_ + sw) * c, kidx);
            }
      }
}

}  // namespace

NodeId Tape::push(TapeNode node) {
  for (NodeId in : node.inputs) {
    if (in >= nodes_.size()) throw ArgumentError("tape input id " + std::to_string(in) + " is not recorded");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Tape::leaf(DTensor value, std::string name) {
  TapeNode n;
  n.op = OpKind::leaf;
  n.value = std::move(value);
  n.requires_grad = true;
  n.name = std::move(name);
  return push(std::move(n));
}

NodeId Tape::constant(DTensor value, std::string name) {
  TapeNode n;
  n.op = OpKind::constant;
  n.value = std::move(value);
  n.name = std::move(name);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  TapeNode n;
  n.op = OpKind::matmul;
  n.inputs = {a, b};
  n.value = rnl::matmul(v(a), v(b));
  return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
  TapeNode n;
  n.op = OpKind::transpose;
  n.inputs = {a};
  n.value = transpose2d(v(a));
  return push(std::move(n));
}

NodeId Tape::softmax_rows(NodeId a) {
  TapeNode n;
  n.op = OpKind::softmax_rows;
  n.inputs = {a};
  n.value = rnl::softmax_rows(v(a));
  return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
  TapeNode n;
  n.op = OpKind::relu;
  n.inputs = {a};
  n.value = rnl::relu(v(a));
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  TapeNode n;
  n.op = OpKind::add;
  n.inputs = {a, b};
  n.value = rnl::add(v(a), v(b));
  return push(std::move(n));
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
  TapeNode n;
  n.op = OpKind::hadamard;
  n.inputs = {a, b};
  n.value = rnl::hadamard(v(a), v(b));
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double k) {
  TapeNode n;
  n.op = OpKind::scale;
  n.inputs = {a};
  n.factor = k;
  n.value = rnl::scale(v(a), k);
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  TapeNode n;
  n.op = OpKind::sum;
  n.inputs = {a};
  n.value = DTensor::scalar(rnl::sum(v(a)));
  return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, Shape shape) {
  TapeNode n;
  n.op = OpKind::reshape;
  n.inputs = {a};
  n.value = v(a).reshaped(std::move(shape));
  return push(std::move(n));
}

NodeId Tape::conv1x1(NodeId x, NodeId w, std::optional<NodeId> bias) {
  require_rank(v(x), 4, "conv1x1");
  TapeNode n;
  n.op = OpKind::conv1x1;
  n.inputs = {x, w};
  std::optional<DTensor> b;
  if (bias) {
    n.inputs.push_back(*bias);
    b = v(*bias);
  }
  n.value = rnl::conv1x1(FeatureClip<double>(v(x)), v(w), b).tensor();
  return push(std::move(n));
}

NodeId Tape::channelwise_conv(NodeId x, NodeId u, const KernelGeometry& g, std::optional<NodeId> bias) {
  require_rank(v(x), 4, "channelwise_conv");
  TapeNode n;
  n.op = OpKind::channelwise_conv;
  n.inputs = {x, u};
  n.geometry = g;
  std::optional<DTensor> b;
  if (bias) {
    n.inputs.push_back(*bias);
    b = v(*bias);
  }
  n.value = aggregate(FeatureClip<double>(v(x)), RegionKernel<double>::conv(g, v(u), b)).tensor();
  return push(std::move(n));
}

NodeId Tape::avg_pool(NodeId x, const KernelGeometry& g) {
  require_rank(v(x), 4, "avg_pool");
  TapeNode n;
  n.op = OpKind::avg_pool;
  n.inputs = {x};
  n.geometry = g;
  n.value = aggregate(FeatureClip<double>(v(x)), RegionKernel<double>::pooling(g, AggregationMode::avg_pool)).tensor();
  return push(std::move(n));
}

NodeId Tape::max_pool(NodeId x, const KernelGeometry& g) {
  require_rank(v(x), 4, "max_pool");
  TapeNode n;
  n.op = OpKind::max_pool;
  n.inputs = {x};
  n.geometry = g;
  n.value = max_pool_with_argmax(FeatureClip<double>(v(x)), g, n.argmax).tensor();
  return push(std::move(n));
}

NodeId Tape::temporal_shift(NodeId x, ShiftFraction fraction) {
  require_rank(v(x), 4, "temporal_shift");
  TapeNode n;
  n.op = OpKind::temporal_shift;
  n.inputs = {x};
  n.shift = fraction;
  n.value = rnl::temporal_shift(FeatureClip<double>(v(x)), fraction).tensor();
  return push(std::move(n));
}

NodeId Tape::batch_norm(NodeId x, NodeId gamma, NodeId beta, const DTensor& mean, const DTensor& var, double eps) {
  TapeNode n;
  n.op = OpKind::batch_norm;
  n.inputs = {x, gamma, beta};
  n.bn_mean = mean;
  n.bn_var = var;
  n.bn_eps = eps;
  n.value = batch_norm_inference(v(x), BatchNormParams<double>{v(gamma), v(beta), mean, var, eps});
  return push(std::move(n));
}

NodeId Tape::row_normalize(NodeId a) {
  const DTensor& in = v(a);
  require_rank(in, 2, "row_normalize");
  TapeNode n;
  n.op = OpKind::row_normalize;
  n.inputs = {a};
  const std::size_t p = in.extent(0), c = in.extent(1);
  n.value = DTensor(in.shape(), 0.0);
  n.row_norms.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < c; ++k) sq += in[i * c + k] * in[i * c + k];
    const double norm = std::sqrt(sq);
    n.row_norms[i] = norm;
    if (norm < kCosineZeroNorm) continue;
    for (std::size_t k = 0; k < c; ++k) n.value[i * c + k] = in[i * c + k] / norm;
  }
  return push(std::move(n));
}

NodeId Tape::mean_rows(NodeId a) {
  const DTensor& in = v(a);
  require_rank(in, 2, "mean_rows");
  TapeNode n;
  n.op = OpKind::mean_rows;
  n.inputs = {a};
  const std::size_t p = in.extent(0), c = in.extent(1);
  std::vector<double> acc(c, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < c; ++k) acc[k] += in[i * c + k];
  for (auto& x : acc) x /= static_cast<double>(p);
  n.value = DTensor({1, c}, std::move(acc));
  return push(std::move(n));
}

NodeId Tape::opaque(std::string name, std::vector<NodeId> inputs, DTensor value) {
  TapeNode n;
  n.op = OpKind::opaque;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.name = std::move(name);
  return push(std::move(n));
}

Gradients Tape::backward(NodeId root) const {
  if (root >= nodes_.size()) throw ArgumentError("backward root " + std::to_string(root) + " is not recorded");
  if (nodes_[root].value.shape() != Shape{1}) {
    throw ContractError("backward needs a scalar root of shape (1), got " + rnl::to_string(nodes_[root].value.shape()));
  }
  std::vector<std::optional<DTensor>> grads(root + 1);
  grads[root] = DTensor::scalar(1.0);

  auto accumulate = [&](NodeId id, DTensor g) {
    if (!nodes_[id].requires_grad) return;
    if (!grads[id]) {
      grads[id] = std::move(g);
    } else {
      auto dst = grads[id]->data();
      auto src = g.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  };

  for (NodeId id = root + 1; id-- > 0;) {
    const TapeNode& n = nodes_[id];
    if (!grads[id] || !n.requires_grad) continue;
    const DTensor& g = *grads[id];
    const auto& in = n.inputs;
    switch (n.op) {
      case OpKind::leaf:
      case OpKind::constant:
        break;
      case OpKind::matmul:
        accumulate(in[0], rnl::matmul(g, transpose2d(v(in[1]))));
        accumulate(in[1], rnl::matmul(transpose2d(v(in[0])), g));
        break;
      case OpKind::transpose:
        accumulate(in[0], transpose2d(g));
        break;
      case OpKind::softmax_rows: {
        const DTensor& y = n.value;
        const std::size_t m = y.extent(0), k = y.extent(1);
        DTensor ga(y.shape());
        for (std::size_t i = 0; i < m; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < k; ++j) dot += g[i * k + j] * y[i * k + j];
          for (std::size_t j = 0; j < k; ++j) ga[i * k + j] = y[i * k + j] * (g[i * k + j] - dot);
        }
        accumulate(in[0], std::move(ga));
        break;
      }
      case OpKind::relu: {
        const DTensor& a = v(in[0]);
        DTensor ga(a.shape());
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] = a[i] > 0.0 ? g[i] : 0.0;
        accumulate(in[0], std::move(ga));
        break;
      }
      case OpKind::add:
        accumulate(in[0], reduce_to(g, v(in[0]).shape()));
        accumulate(in[1], reduce_to(g, v(in[1]).shape()));
        break;
      case OpKind::hadamard:
        accumulate(in[0], reduce_to(rnl::hadamard(g, v(in[1])), v(in[0]).shape()));
        accumulate(in[1], reduce_to(rnl::hadamard(g, v(in[0])), v(in[1]).shape()));
        break;
      case OpKind::scale:
        accumulate(in[0], rnl::scale(g, n.factor));
        break;
      case OpKind::sum:
        accumulate(in[0], DTensor(v(in[0]).shape(), g[0]));
        break;
      case OpKind::reshape:
        accumulate(in[0], g.reshaped(v(in[0]).shape()));
        break;
      case OpKind::conv1x1: {
        const DTensor& x = v(in[0]);
        const DTensor& w = v(in[1]);
        const Shape& s = x.shape();
        const std::size_t p = s[0] * s[1] * s[2];
        const DTensor xf = x.reshaped({p, s[3]});
        const DTensor gf = g.reshaped({p, w.extent(1)});
        accumulate(in[0], rnl::matmul(gf, transpose2d(w)).reshaped(s));
        accumulate(in[1], rnl::matmul(transpose2d(xf), gf));
        if (in.size() > 2) accumulate(in[2], reduce_to(gf, {1, w.extent(1)}).reshaped(v(in[2]).shape()));
        break;
      }
      case OpKind::channelwise_conv: {
        const DTensor& x = v(in[0]);
        const DTensor& u = v(in[1]);
        const std::size_t c = x.extent(3);
        DTensor gx(x.shape(), 0.0), gu(u.shape(), 0.0);
        for_each_window(x.shape(), n.geometry, [&](std::size_t out, std::size_t src, std::size_t kidx) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            gx[src + ch] += u[kidx * c + ch] * g[out + ch];
            gu[kidx * c + ch] += x[src + ch] * g[out + ch];
          }
        });
        accumulate(in[0], std::move(gx));
        accumulate(in[1], std::move(gu));
        if (in.size() > 2) {
          const std::size_t p = x.size() / c;
          accumulate(in[2], reduce_to(g.reshaped({p, c}), {1, c}).reshaped(v(in[2]).shape()));
        }
        break;
      }
      case OpKind::avg_pool: {
        const DTensor& x = v(in[0]);
        const std::size_t c = x.extent(3);
        const double inv = 1.0 / static_cast<double>(n.geometry.volume());
        DTensor gx(x.shape(), 0.0);
        for_each_window(x.shape(), n.geometry, [&](std::size_t out, std::size_t src, std::size_t) {
          for (std::size_t ch = 0; ch < c; ++ch) gx[src + ch] += g[out + ch] * inv;
        });
        accumulate(in[0], std::move(gx));
        break;
      }
      case OpKind::max_pool: {
        DTensor gx(v(in[0]).shape(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[n.argmax[i]] += g[i];
        accumulate(in[0], std::move(gx));
        break;
      }
      case OpKind::temporal_shift: {
        // The adjoint of a shift is the opposite shift: route each output
        // gradient back to the input cell it was copied from.
        const Shape& s = g.shape();
        const std::size_t fold = shifted_channels(s[3], n.shift);
        const std::size_t frame = s[1] * s[2] * s[3];
        DTensor gx(s, 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t t = i / frame, ch = i % s[3];
          if (ch < fold) {
            if (t > 0) gx[i - frame] += g[i];
          } else if (ch < 2 * fold) {
            if (t + 1 < s[0]) gx[i + frame] += g[i];
          } else {
            gx[i] += g[i];
          }
        }
        accumulate(in[0], std::move(gx));
        break;
      }
      case OpKind::batch_norm: {
        const DTensor& x = v(in[0]);
        const DTensor& gamma = v(in[1]);
        const std::size_t c = x.shape().back();
        std::vector<double> inv(c);
        for (std::size_t k = 0; k < c; ++k) inv[k] = 1.0 / std::sqrt((*n.bn_var)[k] + n.bn_eps);
        DTensor gx(x.shape()), gg({c}, 0.0), gb({c}, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const std::size_t k = i % c;
          gx[i] = g[i] * gamma[k] * inv[k];
          gg[k] += g[i] * (x[i] - (*n.bn_mean)[k]) * inv[k];
          gb[k] += g[i];
        }
        accumulate(in[0], std::move(gx));
        accumulate(in[1], std::move(gg).reshaped(gamma.shape()));
        accumulate(in[2], std::move(gb).reshaped(v(in[2]).shape()));
        break;
      }
      case OpKind::row_normalize: {
        const DTensor& y = n.value;
        const std::size_t p = y.extent(0), c = y.extent(1);
        DTensor ga(y.shape(), 0.0);
        for (std::size_t i = 0; i < p; ++i) {
          if (n.row_norms[i] < kCosineZeroNorm) continue;
          double dot = 0.0;
          for (std::size_t k = 0; k < c; ++k) dot += y[i * c + k] * g[i * c + k];
          for (std::size_t k = 0; k < c; ++k) {
            ga[i * c + k] = (g[i * c + k] - y[i * c + k] * dot) / n.row_norms[i];
          }
        }
        accumulate(in[0], std::move(ga));
        break;
      }
      case OpKind::mean_rows: {
        const Shape& s = v(in[0]).shape();
        DTensor ga(s);
        const double inv = 1.0 / static_cast<double>(s[0]);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = g[i % s[1]] * inv;
        accumulate(in[0], std::move(ga));
        break;
      }
      case OpKind::opaque:
        throw UnsupportedOpError("no backward rule registered for op '" + n.name + "'");
    }
  }

  Gradients out;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].op != OpKind::leaf) continue;
    if (id <= root && grads[id]) {
      out.emplace(id, std::move(*grads[id]));
    } else {
      out.emplace(id, DTensor(nodes_[id].value.shape(), 0.0));
    }
  }
  return out;
}

std::vector<std::int64_t> Tape::kink_signature() const {
  std::vector<std::int64_t> sig;
  for (const TapeNode& n : nodes_) {
    switch (n.op) {
      case OpKind::relu:
        for (double a : v(n.inputs[0]).data()) sig.push_back(a > 0.0 ? 1 : (a < 0.0 ? -1 : 0));
        break;
      case OpKind::max_pool:
        for (std::size_t a : n.argmax) sig.push_back(static_cast<std::int64_t>(a));
        break;
      case OpKind::row_normalize:
        for (double r : n.row_norms) sig.push_back(r < kCosineZeroNorm ? 1 : 0);
        break;
      default:
        break;
    }
  }
  return sig;
}

}  // namespace rnl::autodiff
