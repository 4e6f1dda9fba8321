#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rnl/cli/commands.hpp"
#include "rnl/cli/map_export.hpp"
#include "rnl/cli/synthetic.hpp"
#include "rnl/tensor_io.hpp"

using namespace rnl;
using namespace rnl::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path tmp(const std::string& name) {
  const fs::path p = fs::path(RNL_TEST_TMP) / "cli" / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

YAML::Node config(const std::string& text) { return YAML::Load(text); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config validation names the offending key") {
    try {
      (void)build_config(config("block: {kind: rnl, colour: red}"), "run");
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("block.colour") != std::string::npos);
    }
    CHECK_THROWS_AS(build_config(config("block: {form: euclid}"), "run"), ConfigError);
    CHECK_THROWS_AS(build_config(config("precision: f16"), "run"), ConfigError);
    CHECK_THROWS_AS(build_config(config("input: {shape: [2, 4, 4]}"), "run"), ConfigError);
    CHECK_THROWS_AS(build_config(config("zzz: 1"), "run"), ConfigError);
  }

  TEST_CASE("config values and defaults") {
    const auto cfg = build_config(
        config("seed: 9\nblock: {kind: chain, form: cosine, ftheta: {mode: max, kt: 1, kh: 3, kw: 5}}\n"
               "input: {pattern: constant, value: 2.5, shape: [2, 3, 4, 8]}"),
        "run");
    CHECK(cfg.seed == 9);
    CHECK(cfg.block.kind == BlockKind::chain);
    CHECK(cfg.block.form == SimilarityForm::cosine);
    CHECK(cfg.block.mode == AggregationMode::max_pool);
    CHECK(cfg.block.kernel == KernelGeometry{1, 3, 5});
    CHECK(cfg.synthetic.pattern == Pattern::constant);
    CHECK(cfg.synthetic.value == 2.5);
    CHECK(cfg.synthetic.shape == std::array<std::size_t, 4>{2, 3, 4, 8});
    CHECK(build_config(config("{}"), "gradcheck").synthetic.shape == std::array<std::size_t, 4>{2, 3, 3, 4});
    CHECK(build_config(config("{}"), "oracle").synthetic.shape == std::array<std::size_t, 4>{2, 4, 4, 8});
  }

  TEST_CASE("dotted overrides") {
    YAML::Node root = config("block: {kind: nl}");
    apply_override(root, "block.kind", "rnl");
    apply_override(root, "block.ftheta.mode", "avg");
    apply_override(root, "input.shape", "[1, 2, 2, 4]");
    const auto cfg = build_config(root, "run");
    CHECK(cfg.block.kind == BlockKind::rnl);
    CHECK(cfg.block.mode == AggregationMode::avg_pool);
    CHECK(cfg.synthetic.shape == std::array<std::size_t, 4>{1, 2, 2, 4});
    CHECK(parse_ref("1,2,3") == Ref{1, 2, 3});
    CHECK_THROWS_AS(parse_ref("1,2"), ConfigError);
  }

  TEST_CASE("seeded runs are byte identical") {
    const auto a = tmp("det_a"), b = tmp("det_b"), c = tmp("det_c");
    const std::vector<std::string> base{"run", "--seed", "3", "--ref", "1,2,2", "--block.bn_gamma", "0.5"};
    auto with_out = [&](const fs::path& p, std::string seed) {
      auto args = base;
      args[2] = seed;
      args.insert(args.end(), {"--out", p.string()});
      return invoke(args);
    };
    const auto ra = with_out(a, "3"), rb = with_out(b, "3"), rc = with_out(c, "4");
    REQUIRE(ra.code == kExitOk);
    REQUIRE(rb.code == kExitOk);
    CHECK(tree(a) == tree(b));
    CHECK(tree(a).at("z.rnlt") != tree(c).at("z.rnlt"));
    CHECK(tree(a).count("params/rnl.w_g.rnlt") == 1);
    CHECK(tree(a).count("map_t1_h2_w2.csv") == 1);
  }

  TEST_CASE("exported maps are valid PGM frames") {
    const auto dir = tmp("pgm");
    const auto r = invoke({"run", "--out", dir.string(), "--ref", "0,0,0", "--input.shape", "[2, 5, 6, 8]"});
    REQUIRE(r.code == kExitOk);
    for (int f = 0; f < 2; ++f) {
      const std::string bytes = slurp(dir / ("map_t0_h0_w0_f" + std::to_string(f) + ".pgm"));
      const std::string header = "P5\n6 5\n255\n";
      REQUIRE(bytes.size() == header.size() + 30);
      CHECK(bytes.substr(0, header.size()) == header);
    }
    const std::string csv = slurp(dir / "map_t0_h0_w0.csv");
    CHECK(csv.rfind("t,h,w,value\r\n", 0) == 0);
    std::size_t rows = 0;
    for (char ch : csv) rows += ch == '\n';
    CHECK(rows == 1 + 60);
  }

  TEST_CASE("map rendering") {
    FeatureClip<double> flat(1, 2, 2, 1, 0.3);
    CHECK(render_map(flat)[0].pixels == std::vector<std::uint8_t>(4, 128));
    FeatureClip<double> ramp(Tensor<double>({2, 1, 2, 1}, {0.0, 1.0, 2.0, 3.0}));
    const auto frames = render_map(ramp);
    CHECK(frames[0].pixels == std::vector<std::uint8_t>{0, 85});
    CHECK(frames[1].pixels == std::vector<std::uint8_t>{170, 255});
  }

  TEST_CASE("oracle exit codes") {
    CHECK(invoke({"oracle", "--seed", "2"}).code == kExitOk);
    CHECK(invoke({"oracle", "--seed", "2", "--precision", "f32"}).code == kExitOk);
    const auto bad = invoke({"oracle", "--seed", "2", "--oracle.corrupt", "true"});
    CHECK(bad.code == kExitToleranceFailure);
    CHECK(bad.out.find("status: FAIL") != std::string::npos);
    const auto big = invoke({"oracle", "--oracle.max_positions", "10"});
    CHECK(big.code == kExitError);
    CHECK(big.err.rfind("error[argument]: ", 0) == 0);
    CHECK(invoke({"oracle", "--input.shape", "[1, 1, 1, 4]"}).code == kExitOk);
    for (const char* kind : {"nl", "se", "chain"}) {
      CHECK(invoke({"oracle", "--block.kind", kind, "--block.bn_gamma", "0.4"}).code == kExitOk);
    }
  }

  TEST_CASE("gradcheck passes for each block kind") {
    for (const char* seed : {"0", "1", "2"}) {
      CHECK(invoke({"gradcheck", "--seed", seed}).code == kExitOk);
    }
    // A 3x3x3 region fits the 3x3 frames, so no kernel tap sees mostly padding
    // and every gradient coordinate is well above finite-difference noise.
    for (const char* kind : {"rnl", "nl", "se", "chain"}) {
      const auto r = invoke({"gradcheck", "--seed", "1", "--block.kind", kind, "--block.ftheta.kh", "3",
                             "--block.ftheta.kw", "3"});
      CAPTURE(r.out);
      CHECK(r.code == kExitOk);
      CHECK(r.out.find("status: PASS") != std::string::npos);
    }
  }

  TEST_CASE("cost yaml parses") {
    const auto r = invoke({"cost", "--format", "yaml"});
    REQUIRE(r.code == kExitOk);
    const YAML::Node doc = YAML::Load(r.out);
    CHECK(doc["stages"].size() == 6);
    CHECK(doc["total"]["params"].as<std::uint64_t>() == 24327632);
    CHECK(doc["published"].size() >= 5);
    const auto table = invoke({"cost", "--arch", RNL_DATA_DIR "/resnet50_5rnl.arch"});
    CHECK(table.out.find("total params: 28.31M") != std::string::npos);
    CHECK(table.out.find("reference figures") == std::string::npos);
  }

  TEST_CASE("gen writes the clip and mask") {
    const auto dir = tmp("gen");
    const auto r = invoke({"gen", "--out", dir.string(), "--input.pattern", "moving-dot", "--seed", "4"});
    REQUIRE(r.code == kExitOk);
    const auto clip = load_tensor<double>(dir / "clip.rnlt");
    const auto mask = load_tensor<double>(dir / "mask.rnlt");
    CHECK(clip.shape() == Shape{4, 16, 16, 64});
    CHECK(mask.shape() == Shape{4, 16, 16, 1});
    SyntheticSpec spec;
    spec.pattern = Pattern::moving_dot;
    spec.shape = {4, 16, 16, 64};
    for (std::size_t t = 0; t < 4; ++t) {
      const auto centre = dot_centre(spec, t);
      CHECK(mask[(t * 16 + std::size_t(centre[0])) * 16 + std::size_t(centre[1])] == 1.0);
    }
  }

  TEST_CASE("synthetic clips are reproducible") {
    SyntheticSpec spec;
    spec.pattern = Pattern::moving_dot;
    CHECK(generate_clip(spec, 5).clip == generate_clip(spec, 5).clip);
    CHECK(!(generate_clip(spec, 5).clip == generate_clip(spec, 6).clip));
    spec.pattern = Pattern::constant;
    spec.value = -2.0;
    const auto constant = generate_clip(spec, 1);
    for (double v : constant.clip.tensor().data()) CHECK(v == -2.0);
  }

  TEST_CASE("errors print a single prefixed line") {
    const auto missing = invoke({"run", "--input.path", "/nonexistent.rnlt", "--out", tmp("e1").string()});
    CHECK(missing.code == kExitError);
    CHECK(missing.err.rfind("error[io]: ", 0) == 0);
    CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);
    CHECK(invoke({"run", "--block.kind", "bogus"}).err.rfind("error[config]: ", 0) == 0);
    CHECK(invoke({"frobnicate"}).err.rfind("error[usage]: ", 0) == 0);
    CHECK(invoke({"run", "--ref", "9,9,9", "--out", tmp("e2").string()}).err.rfind("error[argument]: ", 0) == 0);
    CHECK(invoke({"run", "--block.kind", "se", "--ref", "0,0,0", "--out", tmp("e3").string()}).code == kExitError);
    CHECK(invoke({"cost", "--arch", "/nonexistent.arch"}).err.rfind("error[io]: ", 0) == 0);
  }

  TEST_CASE("parameter files override seeded weights") {
    const auto first = tmp("params_a"), second = tmp("params_b");
    REQUIRE(invoke({"run", "--seed", "1", "--block.bn_gamma", "1", "--out", first.string()}).code == kExitOk);
    REQUIRE(invoke({"run", "--seed", "2", "--block.bn_gamma", "1", "--block.params", (first / "params").string(), "--out",
                 second.string(), "--input.path", (first / "z.rnlt").string()})
                .code == kExitOk);
    CHECK(tree(first / "params") == tree(second / "params"));
  }
}
