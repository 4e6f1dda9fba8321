#include "rnl/blocks.hpp"

#include "rnl/random.hpp"

namespace rnl {

std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::nl:
      return "nl";
    case BlockKind::rnl:
      return "rnl";
    case BlockKind::se:
      return "se";
    case BlockKind::chain:
      return "chain";
  }
  return "?";
}

BlockKind parse_block_kind(const std::string& token) {
  if (token == "nl") return BlockKind::nl;
  if (token == "rnl") return BlockKind::rnl;
  if (token == "se") return BlockKind::se;
  if (token == "chain" || token == "se+rnl") return BlockKind::chain;
  throw ArgumentError("unknown block kind '" + token + "' (expected nl|rnl|se|chain)");
}

namespace {

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& want, const char* name) {
  if (t.shape() != want) {
    throw DimensionError(std::string(name) + " has shape " + to_string(t.shape()) + ", expected " + to_string(want));
  }
}

template <typename T>
void require_bn(const std::optional<BatchNormParams<T>>& bn, std::size_t c, const char* name) {
  if (!bn) return;
  for (const Tensor<T>* p : {&bn->gamma, &bn->beta, &bn->mean, &bn->var}) require_shape(*p, {c}, name);
}

template <typename T>
void require_params(bool present, BlockKind kind, const char* which) {
  if (!present) throw ArgumentError(to_string(kind) + " block config is missing " + which + " parameters");
}

template <typename T>
FeatureClip<T> residual_output(const FeatureClip<T>& x, const Tensor<T>& y, const Tensor<T>& w_z,
                               const std::optional<BatchNormParams<T>>& bn) {
  FeatureClip<T> proj = conv1x1(FeatureClip<T>::unflatten(y, x.t(), x.h(), x.w()), w_z);
  if (bn) proj = batch_norm_inference(proj, *bn);
  return FeatureClip<T>(add(proj.tensor(), x.tensor()));
}

template <typename T>
void require_channels(const FeatureClip<T>& x, const BlockConfig<T>& cfg) {
  if (x.c() != cfg.channels) {
    throw DimensionError(to_string(cfg.kind) + " block configured for " + std::to_string(cfg.channels) +
                         " channels, input has " + std::to_string(x.c()));
  }
}

}  // namespace

template <typename T>
void BlockConfig<T>::validate() const {
  if (channels == 0) throw ArgumentError("block channels must be positive");
  if (reduction == 0 || channels % reduction != 0) {
    throw ArgumentError("reduction ratio " + std::to_string(reduction) + " must divide channels " +
                        std::to_string(channels));
  }
  const std::size_t c = channels, cr = bottleneck();
  if (kind == BlockKind::rnl || kind == BlockKind::chain) {
    require_params<T>(rnl.has_value(), kind, "rnl");
    require_shape(rnl->w_g, {c, cr}, "rnl.w_g");
    require_shape(rnl->w_z, {cr, c}, "rnl.w_z");
    rnl->kernel.validate(cr);
    require_bn(rnl->residual_bn, c, "rnl.bn");
  }
  if (kind == BlockKind::nl) {
    require_params<T>(nl.has_value(), kind, "nl");
    require_shape(nl->w_theta, {c, cr}, "nl.w_theta");
    require_shape(nl->w_phi, {c, cr}, "nl.w_phi");
    require_shape(nl->w_g, {c, cr}, "nl.w_g");
    require_shape(nl->w_z, {cr, c}, "nl.w_z");
    require_bn(nl->residual_bn, c, "nl.bn");
  }
  if (kind == BlockKind::se || kind == BlockKind::chain) {
    require_params<T>(se.has_value(), kind, "se");
    require_shape(se->w1, {cr, c}, "se.w1");
    require_shape(se->w2, {c, cr}, "se.w2");
    require_bn(std::optional<BatchNormParams<T>>(se->bn), cr, "se.bn");
  }
}

template <typename T>
BlockConfig<T> make_block(const BlockOptions& o, std::uint64_t seed) {
  BlockConfig<T> cfg;
  cfg.kind = o.kind;
  cfg.channels = o.channels;
  cfg.reduction = o.reduction;
  cfg.form = o.form;
  if (o.channels == 0 || o.reduction == 0 || o.channels % o.reduction != 0) {
    throw ArgumentError("reduction ratio " + std::to_string(o.reduction) + " must divide channels " +
                        std::to_string(o.channels));
  }
  const std::size_t c = o.channels, cr = o.channels / o.reduction;
  Rng rng(seed);
  auto residual_bn = [&]() -> std::optional<BatchNormParams<T>> {
    if (!o.residual_bn) return std::nullopt;
    return BatchNormParams<T>::identity(c, static_cast<T>(o.bn_gamma));
  };
  if (o.kind == BlockKind::se || o.kind == BlockKind::chain) {
    Rng r = rng.fork();
    SeParams<T> se{init_weights<T>({cr, c}, c, r), BatchNormParams<T>::identity(cr), init_weights<T>({c, cr}, cr, r)};
    cfg.se = std::move(se);
  }
  if (o.kind == BlockKind::rnl || o.kind == BlockKind::chain) {
    Rng r = rng.fork();
    RnlParams<T> p;
    p.w_g = init_weights<T>({c, cr}, c, r);
    p.w_z = init_weights<T>({cr, c}, cr, r);
    o.kernel.validate();
    if (o.mode == AggregationMode::channelwise_conv) {
      const KernelGeometry& g = o.kernel;
      auto u = init_weights<T>({g.kt, g.kh, g.kw, cr}, g.volume(), r);
      std::optional<Tensor<T>> bias;
      if (o.kernel_bias) bias = init_weights<T>({cr}, g.volume(), r);
      p.kernel = RegionKernel<T>::conv(g, std::move(u), std::move(bias));
    } else {
      p.kernel = RegionKernel<T>::pooling(o.kernel, o.mode);
    }
    p.residual_bn = residual_bn();
    cfg.rnl = std::move(p);
  }
  if (o.kind == BlockKind::nl) {
    Rng r = rng.fork();
    NlParams<T> p;
    p.w_theta = init_weights<T>({c, cr}, c, r);
    p.w_phi = init_weights<T>({c, cr}, c, r);
    p.w_g = init_weights<T>({c, cr}, c, r);
    p.w_z = init_weights<T>({cr, c}, cr, r);
    p.residual_bn = residual_bn();
    cfg.nl = std::move(p);
  }
  cfg.validate();
  return cfg;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> named_parameters(BlockConfig<T>& cfg) {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  auto add_bn = [&](const char* prefix, std::optional<BatchNormParams<T>>& bn) {
    if (!bn) return;
    out.emplace_back(std::string(prefix) + ".bn.gamma", &bn->gamma);
    out.emplace_back(std::string(prefix) + ".bn.beta", &bn->beta);
  };
  if ((cfg.kind == BlockKind::se || cfg.kind == BlockKind::chain) && cfg.se) {
    out.emplace_back("se.w1", &cfg.se->w1);
    out.emplace_back("se.bn.gamma", &cfg.se->bn.gamma);
    out.emplace_back("se.bn.beta", &cfg.se->bn.beta);
    out.emplace_back("se.w2", &cfg.se->w2);
  }
  if ((cfg.kind == BlockKind::rnl || cfg.kind == BlockKind::chain) && cfg.rnl) {
    RnlParams<T>& p = *cfg.rnl;
    out.emplace_back("rnl.w_g", &p.w_g);
    out.emplace_back("rnl.w_z", &p.w_z);
    if (p.kernel.weights) out.emplace_back("rnl.kernel.u", &*p.kernel.weights);
    if (p.kernel.bias) out.emplace_back("rnl.kernel.bias", &*p.kernel.bias);
    add_bn("rnl", p.residual_bn);
  }
  if (cfg.kind == BlockKind::nl && cfg.nl) {
    NlParams<T>& p = *cfg.nl;
    out.emplace_back("nl.w_theta", &p.w_theta);
    out.emplace_back("nl.w_phi", &p.w_phi);
    out.emplace_back("nl.w_g", &p.w_g);
    out.emplace_back("nl.w_z", &p.w_z);
    add_bn("nl", p.residual_bn);
  }
  return out;
}

template <typename T>
BlockOutput<T> rnl_forward(const FeatureClip<T>& x, const BlockConfig<T>& cfg) {
  if (cfg.kind != BlockKind::rnl && cfg.kind != BlockKind::chain) {
    throw ArgumentError("rnl_forward needs an rnl config, got " + to_string(cfg.kind));
  }
  cfg.validate();
  require_channels(x, cfg);
  const RnlParams<T>& p = *cfg.rnl;
  const FeatureClip<T> g = conv1x1(x, p.w_g);
  const Tensor<T> e = aggregate(g, p.kernel).flatten();
  AffinityMatrix<T> a = normalize(affinity(e, cfg.form));
  Tensor<T> y = matmul(a.w, g.flatten());
  FeatureClip<T> z = residual_output(x, y, p.w_z, p.residual_bn);
  return {std::move(z), std::move(a), std::nullopt, std::move(y)};
}

template <typename T>
BlockOutput<T> nl_forward(const FeatureClip<T>& x, const BlockConfig<T>& cfg) {
  if (cfg.kind != BlockKind::nl) throw ArgumentError("nl_forward needs an nl config, got " + to_string(cfg.kind));
  cfg.validate();
  require_channels(x, cfg);
  const NlParams<T>& p = *cfg.nl;
  const Tensor<T> theta = conv1x1(x, p.w_theta).flatten();
  const Tensor<T> phi = conv1x1(x, p.w_phi).flatten();
  const Tensor<T> g = conv1x1(x, p.w_g).flatten();
  AffinityMatrix<T> a{softmax_rows(matmul(theta, transpose2d(phi))), true, SimilarityForm::gaussian};
  Tensor<T> y = matmul(a.w, g);
  FeatureClip<T> z = residual_output(x, y, p.w_z, p.residual_bn);
  return {std::move(z), std::move(a), std::nullopt, std::move(y)};
}

template <typename T>
Tensor<T> se_squeeze(const FeatureClip<T>& x) {
  const std::size_t c = x.c(), positions = x.positions();
  std::vector<double> acc(c, 0.0);
  const auto& xt = x.tensor();
  for (std::size_t i = 0; i < positions; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += xt[i * c + ch];
  Tensor<T> squeezed({1, c});
  for (std::size_t ch = 0; ch < c; ++ch) squeezed[ch] = static_cast<T>(acc[ch] / static_cast<double>(positions));
  return squeezed;
}

template <typename T>
BlockOutput<T> se_forward(const FeatureClip<T>& x, const BlockConfig<T>& cfg) {
  if (cfg.kind != BlockKind::se && cfg.kind != BlockKind::chain) {
    throw ArgumentError("se_forward needs an se config, got " + to_string(cfg.kind));
  }
  cfg.validate();
  require_channels(x, cfg);
  const SeParams<T>& p = *cfg.se;
  const Tensor<T> squeezed = se_squeeze(x);
  // Excitation.
  const Tensor<T> hidden = relu(batch_norm_inference(matmul(squeezed, transpose2d(p.w1)), p.bn));
  Tensor<T> s = matmul(hidden, transpose2d(p.w2));
  // Broadcast add over positions.
  Tensor<T> v = add(x.flatten(), s);
  return {FeatureClip<T>::unflatten(std::move(v), x.t(), x.h(), x.w()), std::nullopt, std::move(s), std::nullopt};
}

template <typename T>
BlockOutput<T> chain_forward(const FeatureClip<T>& x, const BlockConfig<T>& se_cfg, const BlockConfig<T>& rnl_cfg) {
  if (se_cfg.channels != rnl_cfg.channels) {
    throw DimensionError("attention chain blocks disagree on channels: " + std::to_string(se_cfg.channels) + " vs " +
                         std::to_string(rnl_cfg.channels));
  }
  BlockOutput<T> se_out = se_forward(x, se_cfg);
  BlockOutput<T> out = rnl_forward(se_out.z, rnl_cfg);
  out.se_vector = std::move(se_out.se_vector);
  return out;
}

template <typename T>
std::pair<BlockConfig<T>, BlockConfig<T>> split_chain(const BlockConfig<T>& cfg) {
  if (cfg.kind != BlockKind::chain) throw ArgumentError("split_chain needs a chain config");
  BlockConfig<T> se = cfg, rnl = cfg;
  se.kind = BlockKind::se;
  se.rnl.reset();
  rnl.kind = BlockKind::rnl;
  rnl.se.reset();
  return {std::move(se), std::move(rnl)};
}

template <typename T>
BlockOutput<T> block_forward(const FeatureClip<T>& x, const BlockConfig<T>& cfg) {
  switch (cfg.kind) {
    case BlockKind::nl:
      return nl_forward(x, cfg);
    case BlockKind::rnl:
      return rnl_forward(x, cfg);
    case BlockKind::se:
      return se_forward(x, cfg);
    case BlockKind::chain: {
      auto [se, rnl] = split_chain(cfg);
      return chain_forward(x, se, rnl);
    }
  }
  throw ArgumentError("unknown block kind");
}

std::size_t shifted_channels(std::size_t channels, ShiftFraction f) {
  // 0 < num/den <= 1/2
  if (f.den == 0 || f.num == 0 || 2 * f.num > f.den) {
    throw ArgumentError("shift fraction " + std::to_string(f.num) + "/" + std::to_string(f.den) +
                        " must lie in (0, 1/2]");
  }
  if ((channels * f.num) % f.den != 0 || ((channels * f.num) / f.den) % 2 != 0) {
    throw ArgumentError("shift fraction " + std::to_string(f.num) + "/" + std::to_string(f.den) + " of " +
                        std::to_string(channels) + " channels is not an even channel count");
  }
  return channels * f.num / f.den / 2;
}

template <typename T>
FeatureClip<T> temporal_shift(const FeatureClip<T>& x, ShiftFraction fraction) {
  const std::size_t fold = shifted_channels(x.c(), fraction);
  FeatureClip<T> out(x.t(), x.h(), x.w(), x.c());
  for (std::size_t t = 0; t < x.t(); ++t)
    for (std::size_t h = 0; h < x.h(); ++h)
      for (std::size_t w = 0; w < x.w(); ++w)
        for (std::size_t ch = 0; ch < x.c(); ++ch) {
          if (ch < fold) {
            if (t > 0) out.at(t, h, w, ch) = x.at(t - 1, h, w, ch);
          } else if (ch < 2 * fold) {
            if (t + 1 < x.t()) out.at(t, h, w, ch) = x.at(t + 1, h, w, ch);
          } else {
            out.at(t, h, w, ch) = x.at(t, h, w, ch);
          }
        }
  return out;
}

template <typename T>
FeatureClip<T> attention_map(const BlockOutput<T>& out, const std::array<std::size_t, 3>& ref) {
  if (!out.affinity) throw ArgumentError("block output carries no affinity matrix");
  const FeatureClip<T>& z = out.z;
  if (ref[0] >= z.t() || ref[1] >= z.h() || ref[2] >= z.w()) {
    throw ArgumentError("reference position " + to_string(Shape{ref[0], ref[1], ref[2]}) + " outside clip " +
                        to_string(Shape{z.t(), z.h(), z.w()}));
  }
  const std::size_t i = (ref[0] * z.h() + ref[1]) * z.w() + ref[2];
  return attention_row(*out.affinity, i, {z.t(), z.h(), z.w()});
}

#define RNL_INSTANTIATE_BLOCKS(T)                                                                              \
  template struct BlockConfig<T>;                                                                              \
  template BlockConfig<T> make_block(const BlockOptions&, std::uint64_t);                                      \
  template std::vector<std::pair<std::string, Tensor<T>*>> named_parameters(BlockConfig<T>&);                  \
  template Tensor<T> se_squeeze(const FeatureClip<T>&);                                                        \
  template BlockOutput<T> rnl_forward(const FeatureClip<T>&, const BlockConfig<T>&);                           \
  template BlockOutput<T> nl_forward(const FeatureClip<T>&, const BlockConfig<T>&);                            \
  template BlockOutput<T> se_forward(const FeatureClip<T>&, const BlockConfig<T>&);                            \
  template BlockOutput<T> chain_forward(const FeatureClip<T>&, const BlockConfig<T>&, const BlockConfig<T>&);  \
  template BlockOutput<T> block_forward(const FeatureClip<T>&, const BlockConfig<T>&);                         \
  template std::pair<BlockConfig<T>, BlockConfig<T>> split_chain(const BlockConfig<T>&);                       \
  template FeatureClip<T> temporal_shift(const FeatureClip<T>&, ShiftFraction);                                \
  template FeatureClip<T> attention_map(const BlockOutput<T>&, const std::array<std::size_t, 3>&);

RNL_INSTANTIATE_BLOCKS(float)
RNL_INSTANTIATE_BLOCKS(double)

}  // namespace rnl
