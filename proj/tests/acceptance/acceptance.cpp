// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "grad_programs.hpp"
#include "oracles.hpp"
#include "rnl/archcost.hpp"
#include "rnl/cli/commands.hpp"
#include "rnl/cli/synthetic.hpp"

using namespace rnl;
namespace fs = std::filesystem;

namespace {

constexpr SimilarityForm kForms[] = {SimilarityForm::gaussian, SimilarityForm::dot, SimilarityForm::cosine};
constexpr AggregationMode kModes[] = {AggregationMode::channelwise_conv, AggregationMode::avg_pool,
                                      AggregationMode::max_pool};

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

BlockOptions options(BlockKind kind, std::size_t c, double bn_gamma) {
  BlockOptions o;
  o.kind = kind;
  o.channels = c;
  o.bn_gamma = bn_gamma;
  return o;
}

double block_err(const BlockOutput<double>& got, const oracle::BlockResult& want) {
  return std::max({oracle::max_rel_err(got.affinity->w, want.affinity), oracle::max_rel_err(*got.y, want.y),
                   oracle::max_rel_err(got.z.tensor(), want.z.tensor())});
}

Outcome c1_rnl_oracle() {
  double worst = 0.0;
  for (auto form : kForms)
    for (auto mode : kModes)
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto o = options(BlockKind::rnl, 8, 0.75);
        o.form = form;
        o.mode = mode;
        const auto cfg = make_block<double>(o, 1000 + seed);
        const auto x = oracle::random_clip(2, 4, 4, 8, seed);
        worst = std::max(worst, block_err(rnl_forward(x, cfg), oracle::rnl_pairwise(x, cfg)));
      }
  return {worst <= 1e-5, "45 cases, max rel err " + fmt("%.3g", worst)};
}

Outcome c2_nl_oracle() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto cfg = make_block<double>(options(BlockKind::nl, 8, 0.75), 2000 + seed);
    const auto x = oracle::random_clip(2, 4, 4, 8, 100 + seed);
    worst = std::max(worst, block_err(nl_forward(x, cfg), oracle::nl_pairwise(x, cfg)));
  }
  return {worst <= 1e-5, "5 seeds, max rel err " + fmt("%.3g", worst)};
}

Outcome c3_gradients() {
  double worst = 0.0;
  std::size_t programs = 0, checked = 0, skipped = 0;
  std::string worst_name;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto cases = gradprog::op_cases(seed);
    auto blocks = gradprog::block_cases(seed);
    cases.insert(cases.end(), std::make_move_iterator(blocks.begin()), std::make_move_iterator(blocks.end()));
    for (const auto& c : cases) {
      const auto r = autodiff::finite_diff_check(c.program, c.point, 1e-5);
      ++programs;
      checked += r.checked;
      skipped += r.skipped;
      if (r.max_rel_err > worst) {
        worst = r.max_rel_err;
        worst_name = c.name;
      }
    }
  }
  return {worst <= 1e-5, std::to_string(programs) + " programs, " + std::to_string(checked) + " coordinates (" +
                             std::to_string(skipped) + " kink-skipped), max rel err " + fmt("%.3g", worst) + " (" +
                             worst_name + ")"};
}

Outcome c4_normalization() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(5000 + seed);
    const std::size_t p = 4 + seed % 13, c = 1 + seed % 8;
    // Entries up to sqrt(1e3 / c) give logits up to 1e3.
    const double mag = seed % 2 == 0 ? std::sqrt(1e3 / double(c)) : 1.0;
    const auto e = random_uniform<double>({p, c}, rng, -mag, mag);
    const auto a64 = normalize(affinity(e, SimilarityForm::gaussian));
    const auto a32 = normalize(affinity(e.cast<float>(), SimilarityForm::gaussian));
    for (std::size_t i = 0; i < p; ++i) {
      double s64 = 0.0, s32 = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        s64 += a64.w.at(i, j);
        s32 += a32.w.at(i, j);
      }
      worst = std::max({worst, std::abs(s64 - 1.0), std::abs(s32 - 1.0)});
    }
  }
  return {worst <= 1e-6, "100 cases (f64 and f32), max |row sum - 1| " + fmt("%.3g", worst)};
}

Outcome c5_cosine_range() {
  bool in_range = true;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(6000 + seed);
    auto e = random_uniform<double>({10, 4}, rng);
    const auto a = affinity(e, SimilarityForm::cosine);
    for (double v : a.w.data()) in_range = in_range && v >= 0.0 && v <= 1.0;
    for (std::size_t i = 0; i < 10; ++i) {
      const double k = rng.uniform(1e-3, 1e3);
      for (std::size_t c = 0; c < 4; ++c) e.at(i, c) *= k;
    }
    const auto b = affinity(e, SimilarityForm::cosine);
    for (std::size_t i = 0; i < a.w.size(); ++i) worst = std::max(worst, std::abs(a.w[i] - b.w[i]));
  }
  return {in_range && worst <= 1e-6,
          std::string(in_range ? "all values in [0,1]" : "value outside [0,1]") + ", rescaling change " +
              fmt("%.3g", worst)};
}

Outcome c6_channel_isolation() {
  const auto x = oracle::random_clip(4, 8, 8, 6, 7);
  bool ok = true;
  for (auto mode : kModes) {
    Rng rng(8);
    const KernelGeometry g{3, 7, 7};
    const auto k = mode == AggregationMode::channelwise_conv
                       ? RegionKernel<double>::conv(g, random_uniform<double>({3, 7, 7, 6}, rng))
                       : RegionKernel<double>::pooling(g, mode);
    for (std::size_t ch = 0; ch < 6; ++ch) {
      auto bumped = x;
      bumped.at(2, 3, 4, ch) += 5.0;
      const auto a = aggregate(x, k), b = aggregate(bumped, k);
      bool changed = false;
      for (std::size_t i = 0; i < x.positions(); ++i)
        for (std::size_t c = 0; c < 6; ++c) {
          const std::size_t o = i * 6 + c;
          if (c != ch && a.tensor()[o] != b.tensor()[o]) ok = false;
          if (c == ch && a.tensor()[o] != b.tensor()[o]) changed = true;
        }
      ok = ok && changed;
    }
  }
  return {ok, "3 modes x 6 channels, other channels bit-identical"};
}

Outcome c7_identity() {
  const auto x = oracle::random_clip(2, 4, 4, 8, 9);
  bool ok = true;
  for (auto kind : {BlockKind::rnl, BlockKind::nl}) {
    ok = ok && block_forward(x, make_block<double>(options(kind, 8, 0.0), 1)).z == x;
    auto o = options(kind, 8, 1.0);
    o.residual_bn = false;
    auto cfg = make_block<double>(o, 2);
    if (cfg.rnl) cfg.rnl->w_z = Tensor<double>({4, 8});
    if (cfg.nl) cfg.nl->w_z = Tensor<double>({4, 8});
    ok = ok && block_forward(x, cfg).z == x;
  }
  auto se = make_block<double>(options(BlockKind::se, 8, 0.0), 3);
  se.se->w2 = Tensor<double>({8, 4});
  ok = ok && block_forward(x, se).z == x;
  return {ok, "zero-gamma BN and zero W_z (RNL, NL), zero W_2 (SE): outputs bit-identical to input"};
}

Outcome c8_degeneracy() {
  const auto x = oracle::random_clip(2, 3, 3, 8, 10);
  auto o = options(BlockKind::rnl, 8, 0.8);
  o.kernel = {1, 1, 1};
  auto r = make_block<double>(o, 4);
  r.rnl->kernel.weights = Tensor<double>({1, 1, 1, 4}, 1.0);
  auto n = make_block<double>(options(BlockKind::nl, 8, 0.8), 5);
  n.nl->w_theta = n.nl->w_phi = n.nl->w_g = r.rnl->w_g;
  n.nl->w_z = r.rnl->w_z;
  n.nl->residual_bn = r.rnl->residual_bn;
  const double nl_err = oracle::max_rel_err(rnl_forward(x, r).z.tensor(), nl_forward(x, n).z.tensor());

  std::vector<std::size_t> perm(x.positions());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(11));
  auto permute = [&](const FeatureClip<double>& v) {
    FeatureClip<double> out(perm.size(), 1, 1, v.c());
    for (std::size_t i = 0; i < perm.size(); ++i)
      for (std::size_t c = 0; c < v.c(); ++c) out.at(i, 0, 0, c) = v.tensor()[perm[i] * v.c() + c];
    return out;
  };
  double perm_err = 0.0;
  for (auto form : kForms) {
    auto po = o;
    po.form = form;
    const auto cfg = make_block<double>(po, 6);
    perm_err = std::max(perm_err, oracle::max_rel_err(rnl_forward(permute(x), cfg).z.tensor(),
                                                      permute(rnl_forward(x, cfg).z).tensor()));
  }
  return {nl_err <= 1e-6 && perm_err <= 1e-6,
          "RNL vs shared-embedding NL " + fmt("%.3g", nl_err) + ", permutation " + fmt("%.3g", perm_err)};
}

Outcome c9_shapes() {
  const auto shapes = arch::propagate_shapes(arch::resnet50_spec(), {8, 224, 224, 3});
  const std::vector<arch::Dims> want{{8, 112, 112, 64}, {8, 56, 56, 64},  {8, 56, 56, 256},
                                     {8, 28, 28, 512},  {8, 14, 14, 1024}, {8, 7, 7, 2048}};
  bool ok = shapes.size() == want.size();
  std::string listing;
  for (std::size_t i = 0; ok && i < want.size(); ++i) {
    ok = shapes[i].output == want[i];
    listing += (i ? " " : "") + shapes[i].name + "=" + arch::to_string(shapes[i].output);
  }
  return {ok, listing};
}

Outcome c10_cost() {
  const arch::Dims input{8, 224, 224, 3};
  const auto base = arch::count_cost(arch::resnet50_spec(400), input).total;
  arch::AttentionInsertion nl;
  nl.kind = BlockKind::nl;
  const auto five_nl = arch::count_cost(arch::with_five_blocks(arch::resnet50_spec(400), nl), input).total;
  const double p = double(base.params) / 1e6, f = double(base.flops) / 1e9, q = double(five_nl.params) / 1e6;
  const bool numbers = std::abs(p - 24.33) <= 0.01 * 24.33 && std::abs(f - 32.89) <= 0.02 * 32.89 &&
                       std::abs(q - 31.69) <= 0.02 * 31.69;

  // The tool must print both its own count and the published figure for the
  // irreconcilable rows.
  std::ostringstream out, err;
  const int code = cli::run_cli({"cost"}, out, err);
  const std::string text = out.str();
  bool printed = code == cli::kExitOk;
  for (const auto& row : arch::published_comparisons()) {
    if (row.label != "+5 RNL" && row.label.rfind("1 RNL res3 conv", 0) != 0) continue;
    const std::string counted = fmt("%.2fM", double(row.counted.params) / 1e6);
    const std::string published = fmt("%.2fM", row.published_params_m);
    const std::size_t at = text.find(row.label + ":");
    printed = printed && at != std::string::npos;
    if (!printed) break;
    const std::string line = text.substr(at, text.find('\n', at) - at);
    printed = line.find(counted) != std::string::npos && line.find(published) != std::string::npos &&
              line.find("irreconcilable") != std::string::npos;
  }
  return {numbers && printed, "baseline " + fmt("%.2fM", p) + " / " + fmt("%.2fG", f) + ", +5 NL " +
                                  fmt("%.2fM", q) + (printed ? ", irreconcilable rows printed" : ", rows missing")};
}

// Moving-dot concentration over many seeds, then a constant clip under the
// same default block.
Outcome c11_qualitative() {
  cli::SyntheticSpec spec;
  spec.pattern = cli::Pattern::moving_dot;
  spec.shape = {4, 16, 16, 64};
  const std::size_t T = spec.shape[0], H = spec.shape[1], W = spec.shape[2];
  double min_ratio = INFINITY;
  std::size_t passed = 0;
  const std::size_t seeds = 20;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const auto clip = cli::generate_clip(spec, seed);
    const auto cfg = make_block<double>(options(BlockKind::rnl, 64, 0.0), 100 + seed);
    const auto out = rnl_forward(clip.clip, cfg);
    const std::size_t t = T / 2;
    const auto c = cli::dot_centre(spec, t);
    const auto map = attention_map(out, {t, std::size_t(c[0]), std::size_t(c[1])});
    double in_max = 0.0, out_sum = 0.0;
    std::size_t out_n = 0;
    for (std::size_t i = 0; i < T * H * W; ++i) {
      const double v = map.tensor()[i];
      if (clip.mask[i]) {
        in_max = std::max(in_max, v);
      } else {
        out_sum += v;
        ++out_n;
      }
    }
    const double ratio = in_max / (out_sum / double(out_n));
    min_ratio = std::min(min_ratio, ratio);
    passed += ratio >= 2.0;
  }

  const FeatureClip<double> constant(T, H, W, 64, 1.0);
  const auto out = rnl_forward(constant, make_block<double>(options(BlockKind::rnl, 64, 0.0), 7));
  const auto map = attention_map(out, {T / 2, H / 2, W / 2});
  const auto [lo, hi] = std::minmax_element(map.tensor().data().begin(), map.tensor().data().end());
  const double spread = (*hi - *lo) / (1.0 / double(T * H * W));
  const bool uniform = spread <= 1e-6;

  return {passed == seeds && uniform,
          "moving dot " + std::to_string(passed) + "/" + std::to_string(seeds) + " seeds, min in-max/out-mean " +
              fmt("%.3g", min_ratio) + "; constant clip (3x7x7 conv, zero padding) map spread " +
              fmt("%.3g", spread) + " x 1/P" + (uniform ? "" : ", not uniform")};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  }
  return files;
}

Outcome c12_determinism() {
  const fs::path base = fs::path(RNL_TEST_TMP) / "acceptance";
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* name : {"a", "b"}) {
    const fs::path dir = base / name;
    fs::remove_all(dir);
    std::ostringstream out, err;
    const int code = cli::run_cli({"run", "--seed", "17", "--input.pattern", "moving-dot", "--ref", "2,6,6", "--ref",
                                   "0,0,0", "--block.bn_gamma", "0.5", "--out", dir.string()},
                                  out, err);
    if (code != cli::kExitOk) return {false, "run failed: " + err.str()};
    trees.push_back(tree(dir));
  }
  const bool same = trees[0] == trees[1] && !trees[0].empty();
  return {same, std::to_string(trees[0].size()) + " files" + (same ? " byte-identical" : " differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence (RNL)", c1_rnl_oracle},
      {"oracle equivalence (NL)", c2_nl_oracle},
      {"gradient suite", c3_gradients},
      {"gaussian normalization", c4_normalization},
      {"cosine range and scale invariance", c5_cosine_range},
      {"channel isolation", c6_channel_isolation},
      {"identity insertions", c7_identity},
      {"degeneracy", c8_degeneracy},
      {"shape ledger", c9_shapes},
      {"cost model", c10_cost},
      {"moving-dot and constant-clip attention", c11_qualitative},
      {"determinism", c12_determinism},
  };
  // Wall-clock limits in seconds, where one applies.
  const std::map<std::size_t, double> limits{{1, 10.0}, {3, 60.0}};

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const std::size_t id = k + 1;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (auto it = limits.find(id); it != limits.end() && secs >= it->second) {
      o.pass = false;
      o.detail += "; exceeded " + fmt("%.0f", it->second) + " s limit";
    }
    failures += !o.pass;
    std::printf("%s %2zu %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), o.detail.c_str(),
                secs);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
