#include "rnl/block_graph.hpp"

namespace rnl {

using autodiff::NamedTensor;
using autodiff::NodeId;
using autodiff::Tape;

namespace {

// Hands out parameter nodes in order.
class ParamCursor {
 public:
  explicit ParamCursor(std::span<const NodeId> ids) : ids_(ids) {}
  NodeId next() {
    if (pos_ >= ids_.size()) throw ArgumentError("too few parameter nodes for block");
    return ids_[pos_++];
  }
  void finish() const {
    if (pos_ != ids_.size()) throw ArgumentError("too many parameter nodes for block");
  }

 private:
  std::span<const NodeId> ids_;
  std::size_t pos_ = 0;
};

NodeId residual(Tape& tape, NodeId x, NodeId y_flat, NodeId w_z, const std::optional<BatchNormParams<double>>& bn,
                ParamCursor& cur) {
  const Shape& xs = tape.value(x).shape();
  const std::size_t cr = tape.value(y_flat).extent(1);
  NodeId proj = tape.conv1x1(tape.reshape(y_flat, {xs[0], xs[1], xs[2], cr}), w_z);
  if (bn) {
    const NodeId gamma = cur.next();
    const NodeId beta = cur.next();
    proj = tape.batch_norm(proj, gamma, beta, bn->mean, bn->var, bn->eps);
  }
  return tape.add(proj, x);
}

NodeId record_se(Tape& tape, NodeId x, const SeParams<double>& p, ParamCursor& cur) {
  const Shape s = tape.value(x).shape();
  const std::size_t positions = s[0] * s[1] * s[2];
  const NodeId w1 = cur.next(), gamma = cur.next(), beta = cur.next(), w2 = cur.next();
  const NodeId xf = tape.reshape(x, {positions, s[3]});
  const NodeId squeezed = tape.mean_rows(xf);
  NodeId hidden = tape.matmul(squeezed, tape.transpose(w1));
  hidden = tape.relu(tape.batch_norm(hidden, gamma, beta, p.bn.mean, p.bn.var, p.bn.eps));
  const NodeId excite = tape.matmul(hidden, tape.transpose(w2));
  return tape.reshape(tape.add(xf, excite), s);
}

NodeId record_rnl(Tape& tape, NodeId x, const RnlParams<double>& p, SimilarityForm form, ParamCursor& cur) {
  const Shape s = tape.value(x).shape();
  const std::size_t positions = s[0] * s[1] * s[2];
  const NodeId w_g = cur.next(), w_z = cur.next();
  const NodeId g = tape.conv1x1(x, w_g);
  const std::size_t cr = tape.value(g).extent(3);
  NodeId agg = 0;
  switch (p.kernel.mode) {
    case AggregationMode::channelwise_conv: {
      const NodeId u = cur.next();
      std::optional<NodeId> bias;
      if (p.kernel.bias) bias = cur.next();
      agg = tape.channelwise_conv(g, u, p.kernel.geometry, bias);
      break;
    }
    case AggregationMode::avg_pool:
      agg = tape.avg_pool(g, p.kernel.geometry);
      break;
    case AggregationMode::max_pool:
      agg = tape.max_pool(g, p.kernel.geometry);
      break;
  }
  const NodeId e = tape.reshape(agg, {positions, cr});
  const double inv_p = 1.0 / static_cast<double>(positions);
  NodeId attention = 0;
  switch (form) {
    case SimilarityForm::gaussian:
      attention = tape.softmax_rows(tape.matmul(e, tape.transpose(e)));
      break;
    case SimilarityForm::dot:
      attention = tape.scale(tape.matmul(e, tape.transpose(e)), inv_p);
      break;
    case SimilarityForm::cosine: {
      const NodeId n = tape.row_normalize(e);
      attention = tape.scale(tape.relu(tape.matmul(n, tape.transpose(n))), inv_p);
      break;
    }
  }
  const NodeId y = tape.matmul(attention, tape.reshape(g, {positions, cr}));
  return residual(tape, x, y, w_z, p.residual_bn, cur);
}

NodeId record_nl(Tape& tape, NodeId x, const NlParams<double>& p, ParamCursor& cur) {
  const Shape s = tape.value(x).shape();
  const std::size_t positions = s[0] * s[1] * s[2];
  const NodeId w_theta = cur.next(), w_phi = cur.next(), w_g = cur.next(), w_z = cur.next();
  const std::size_t cr = p.w_g.extent(1);
  auto embed = [&](NodeId w) { return tape.reshape(tape.conv1x1(x, w), {positions, cr}); };
  const NodeId theta = embed(w_theta), phi = embed(w_phi), g = embed(w_g);
  const NodeId attention = tape.softmax_rows(tape.matmul(theta, tape.transpose(phi)));
  return residual(tape, x, tape.matmul(attention, g), w_z, p.residual_bn, cur);
}

}  // namespace

std::vector<NamedTensor> block_parameters(const BlockConfig<double>& cfg) {
  cfg.validate();
  BlockConfig<double> copy = cfg;
  std::vector<NamedTensor> out;
  for (auto& [name, tensor] : named_parameters(copy)) out.push_back({name, *tensor});
  return out;
}

NodeId record_block(Tape& tape, NodeId x, const BlockConfig<double>& cfg, std::span<const NodeId> params) {
  cfg.validate();
  const Shape& s = tape.value(x).shape();
  if (s.size() != 4 || s[3] != cfg.channels) {
    throw DimensionError(to_string(cfg.kind) + " block configured for " + std::to_string(cfg.channels) +
                         " channels, input is " + to_string(s));
  }
  ParamCursor cur(params);
  NodeId z = 0;
  switch (cfg.kind) {
    case BlockKind::se:
      z = record_se(tape, x, *cfg.se, cur);
      break;
    case BlockKind::rnl:
      z = record_rnl(tape, x, *cfg.rnl, cfg.form, cur);
      break;
    case BlockKind::nl:
      z = record_nl(tape, x, *cfg.nl, cur);
      break;
    case BlockKind::chain:
      z = record_rnl(tape, record_se(tape, x, *cfg.se, cur), *cfg.rnl, cfg.form, cur);
      break;
  }
  cur.finish();
  return z;
}

void calibrate_residual_bn(BlockConfig<double>& cfg, const FeatureClip<double>& x) {
  std::optional<BatchNormParams<double>>* bn = nullptr;
  const Tensor<double>* w_z = nullptr;
  if (cfg.rnl && (cfg.kind == BlockKind::rnl || cfg.kind == BlockKind::chain)) {
    bn = &cfg.rnl->residual_bn;
    w_z = &cfg.rnl->w_z;
  } else if (cfg.nl && cfg.kind == BlockKind::nl) {
    bn = &cfg.nl->residual_bn;
    w_z = &cfg.nl->w_z;
  }
  if (bn == nullptr || !bn->has_value()) return;
  const Tensor<double> pre = matmul(*block_forward(x, cfg).y, *w_z);
  const std::size_t p = pre.extent(0), c = pre.extent(1);
  for (std::size_t k = 0; k < c; ++k) {
    double square = 0.0;
    for (std::size_t i = 0; i < p; ++i) square += pre.at(i, k) * pre.at(i, k);
    (*bn)->mean[k] = 0.0;
    (*bn)->var[k] = square / double(p);
  }
}

}  // namespace rnl
