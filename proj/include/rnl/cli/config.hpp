#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "rnl/blocks.hpp"

namespace rnl::cli {

using rnl::to_string;

enum class Precision { f32, f64 };
enum class Pattern { random, constant, moving_dot };

std::string to_string(Precision p);
std::string to_string(Pattern p);
Precision parse_precision(const std::string& token);
Pattern parse_pattern(const std::string& token);

struct SyntheticSpec {
  std::array<std::size_t, 4> shape{2, 8, 8, 8};  // T, H, W, C
  Pattern pattern = Pattern::random;
  double value = 1.0;                  // constant
  double radius = 1.5;                 // moving-dot, in pixels
  std::array<long, 2> velocity{1, 1};  // moving-dot, pixels per frame along (h, w)
  std::optional<std::array<long, 2>> start;
  double amplitude = 4.0;  // moving-dot feature scale
  double noise = 0.05;     // moving-dot background noise amplitude
};

using Ref = std::array<std::size_t, 3>;

struct OracleSettings {
  std::optional<double> tolerance;  // defaults to 1e-5 (f64) or 1e-3 (f32)
  bool corrupt = false;
  std::size_t max_positions = 4096;
};

struct GradcheckSettings {
  double h = 1e-5;
  double tolerance = 1e-5;
  bool randomize_bn = true;
};

struct CostSettings {
  std::optional<std::filesystem::path> arch;  // unset: built-in ResNet-50 layout
  std::string input = "8x224x224x3";
  std::string format = "table";  // table | yaml
  std::optional<bool> published;  // unset: on for the built-in layout only
};

struct RunConfig {
  std::string subcommand;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;
  std::filesystem::path out = "rnl-out";
  std::optional<std::filesystem::path> input_path;
  SyntheticSpec synthetic;
  BlockOptions block;  // channels come from the input clip
  std::optional<std::filesystem::path> params_dir;
  std::vector<Ref> refs;
  OracleSettings oracle;
  GradcheckSettings gradcheck;
  CostSettings cost;
};

YAML::Node load_config_file(const std::filesystem::path& path);

// Sets `dotted` (e.g. "block.ftheta.mode") to `value`, parsed as a YAML
// scalar or flow collection.
void apply_override(YAML::Node& root, const std::string& dotted, const std::string& value);

// Validates every key and value; errors name the offending dotted key.
RunConfig build_config(const YAML::Node& root, const std::string& subcommand);

Ref parse_ref(const std::string& text);

}  // namespace rnl::cli
