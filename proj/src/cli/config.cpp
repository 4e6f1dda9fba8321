#include "rnl/cli/config.hpp"

#include <map>
#include <set>
#include <sstream>

namespace rnl::cli {

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::random:
      return "random";
    case Pattern::constant:
      return "constant";
    case Pattern::moving_dot:
      return "moving-dot";
  }
  return "?";
}

Precision parse_precision(const std::string& token) {
  if (token == "f32") return Precision::f32;
  if (token == "f64") return Precision::f64;
  throw ArgumentError("unknown precision '" + token + "' (expected f32|f64)");
}

Pattern parse_pattern(const std::string& token) {
  if (token == "random") return Pattern::random;
  if (token == "constant") return Pattern::constant;
  if (token == "moving-dot" || token == "moving_dot") return Pattern::moving_dot;
  throw ArgumentError("unknown pattern '" + token + "' (expected random|constant|moving-dot)");
}

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"", {"seed", "precision", "out", "refs", "input", "block", "oracle", "gradcheck", "cost"}},
      {"input", {"path", "shape", "pattern", "value", "radius", "velocity", "start", "amplitude", "noise"}},
      {"block", {"kind", "reduction", "form", "ftheta", "residual_bn", "bn_gamma", "params"}},
      {"block.ftheta", {"mode", "kt", "kh", "kw", "bias"}},
      {"oracle", {"tolerance", "corrupt", "max_positions"}},
      {"gradcheck", {"h", "tolerance", "randomize_bn"}},
      {"cost", {"arch", "input", "format", "published"}},
  };
  return s;
}

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

void check_keys(const YAML::Node& node, const std::string& path) {
  const auto& sections = schema();
  const auto allowed = sections.find(path);
  if (!node.IsMap()) throw ConfigError((path.empty() ? std::string("config root") : path) + ": expected a table");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const std::string full = join(path, key);
    if (!allowed->second.contains(key)) throw ConfigError(full + ": unknown key");
    if (sections.contains(full)) check_keys(kv.second, full);
  }
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream is(text);
  while (std::getline(is, part, sep)) parts.push_back(part);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

YAML::Node lookup(const YAML::Node& root, const std::string& dotted) {
  YAML::Node cur = YAML::Clone(root);
  for (const std::string& key : split(dotted, '.')) {
    if (!cur.IsMap()) return YAML::Node();
    YAML::Node next = cur[key];
    if (!next.IsDefined()) return YAML::Node();
    cur = YAML::Clone(next);
  }
  return cur;
}

template <typename T>
std::optional<T> read(const YAML::Node& root, const std::string& dotted, const char* expected) {
  const YAML::Node n = lookup(root, dotted);
  if (!n.IsDefined() || n.IsNull()) return std::nullopt;
  try {
    if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(dotted + ": expected " + expected);
  }
}

std::size_t parse_size(const std::string& token, const std::string& field) {
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(field + ": '" + token + "' is not a non-negative integer");
  }
  return std::stoull(token);
}

template <std::size_t N>
std::array<std::size_t, N> read_sizes(const YAML::Node& n, const std::string& field, char sep) {
  std::vector<std::string> tokens;
  if (n.IsSequence()) {
    for (const auto& item : n) tokens.push_back(item.as<std::string>());
  } else if (n.IsScalar()) {
    tokens = split(n.as<std::string>(), sep);
  } else {
    throw ConfigError(field + ": expected " + std::to_string(N) + " integers");
  }
  if (tokens.size() != N) throw ConfigError(field + ": expected " + std::to_string(N) + " integers");
  std::array<std::size_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_size(tokens[i], field);
  return out;
}

std::array<long, 2> read_pair(const YAML::Node& n, const std::string& field) {
  if (!n.IsSequence() || n.size() != 2) throw ConfigError(field + ": expected [a, b]");
  try {
    return {n[0].as<long>(), n[1].as<long>()};
  } catch (const YAML::Exception&) {
    throw ConfigError(field + ": expected two integers");
  }
}

// Rethrows library argument errors as config errors naming the key.
template <typename F>
auto with_field(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ArgumentError& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

}  // namespace

Ref parse_ref(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw ConfigError("ref: reference position '" + text + "' must be t,h,w");
  Ref r{};
  for (std::size_t i = 0; i < 3; ++i) r[i] = with_field("ref", [&] { return parse_size(parts[i], "ref"); });
  return r;
}

YAML::Node load_config_file(const std::filesystem::path& path) {
  try {
    YAML::Node n = YAML::LoadFile(path.string());
    if (n.IsNull()) return YAML::Node(YAML::NodeType::Map);
    return n;
  } catch (const YAML::BadFile&) {
    throw IoError("cannot read config file " + path.string());
  } catch (const YAML::ParserException& e) {
    throw ConfigError(path.string() + ": line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

void apply_override(YAML::Node& root, const std::string& dotted, const std::string& value) {
  const auto keys = split(dotted, '.');
  for (const auto& k : keys) {
    if (k.empty()) throw ConfigError("malformed option name '" + dotted + "'");
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception&) {
    throw ConfigError(dotted + ": cannot parse value '" + value + "'");
  }
  if (!root.IsMap()) root = YAML::Node(YAML::NodeType::Map);
  YAML::Node cur = root;
  std::string prefix;
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    prefix = join(prefix, keys[i]);
    YAML::Node next = cur[keys[i]];
    if (next.IsDefined() && !next.IsNull() && !next.IsMap()) throw ConfigError(prefix + ": is not a table");
    cur.reset(next);
  }
  cur[keys.back()] = parsed;
}

RunConfig build_config(const YAML::Node& root_in, const std::string& subcommand) {
  const YAML::Node root = root_in.IsDefined() && !root_in.IsNull() ? root_in : YAML::Node(YAML::NodeType::Map);
  check_keys(root, "");
  RunConfig cfg;
  cfg.subcommand = subcommand;

  if (auto v = read<std::uint64_t>(root, "seed", "an unsigned 64-bit integer")) cfg.seed = *v;
  if (auto v = read<std::string>(root, "precision", "f32 or f64")) {
    cfg.precision = with_field("precision", [&] { return parse_precision(*v); });
  }
  if (auto v = read<std::string>(root, "out", "a directory path")) cfg.out = *v;

  if (const YAML::Node refs = lookup(root, "refs"); refs.IsDefined() && !refs.IsNull()) {
    if (!refs.IsSequence()) throw ConfigError("refs: expected a list of t,h,w positions");
    for (const auto& r : refs) cfg.refs.push_back(read_sizes<3>(r, "refs", ','));
  }

  // Input clip.
  if (auto v = read<std::string>(root, "input.path", "a file path")) cfg.input_path = *v;
  SyntheticSpec& syn = cfg.synthetic;
  if (subcommand == "gradcheck") syn.shape = {2, 3, 3, 4};
  if (subcommand == "oracle") syn.shape = {2, 4, 4, 8};
  if (auto v = read<std::string>(root, "input.pattern", "random, constant or moving-dot")) {
    syn.pattern = with_field("input.pattern", [&] { return parse_pattern(*v); });
  }
  // A 7x7 window needs room around the dot, and with few channels random
  // embeddings align by chance, so the dot gets a larger default clip.
  if (syn.pattern == Pattern::moving_dot) syn.shape = {4, 16, 16, 64};
  if (const YAML::Node s = lookup(root, "input.shape"); s.IsDefined() && !s.IsNull()) {
    syn.shape = read_sizes<4>(s, "input.shape", 'x');
  }
  for (std::size_t e : syn.shape) {
    if (e == 0) throw ConfigError("input.shape: every extent must be positive");
  }
  if (auto v = read<double>(root, "input.value", "a number")) syn.value = *v;
  if (auto v = read<double>(root, "input.radius", "a number")) syn.radius = *v;
  if (syn.radius < 0.0) throw ConfigError("input.radius: must be non-negative");
  if (const YAML::Node n = lookup(root, "input.velocity"); n.IsDefined() && !n.IsNull()) syn.velocity = read_pair(n, "input.velocity");
  if (const YAML::Node n = lookup(root, "input.start"); n.IsDefined() && !n.IsNull()) syn.start = read_pair(n, "input.start");
  if (auto v = read<double>(root, "input.amplitude", "a number")) syn.amplitude = *v;
  if (auto v = read<double>(root, "input.noise", "a number")) syn.noise = *v;

  // Block.
  BlockOptions& b = cfg.block;
  if (auto v = read<std::string>(root, "block.kind", "nl, rnl, se or chain")) {
    b.kind = with_field("block.kind", [&] { return parse_block_kind(*v); });
  }
  if (auto v = read<std::size_t>(root, "block.reduction", "a positive integer")) b.reduction = *v;
  if (b.reduction == 0) throw ConfigError("block.reduction: must be positive");
  if (auto v = read<std::string>(root, "block.form", "gaussian, dot or cosine")) {
    b.form = with_field("block.form", [&] { return parse_similarity_form(*v); });
  }
  if (auto v = read<std::string>(root, "block.ftheta.mode", "conv, avg or max")) {
    b.mode = with_field("block.ftheta.mode", [&] { return parse_aggregation_mode(*v); });
  }
  if (auto v = read<std::size_t>(root, "block.ftheta.kt", "an odd positive integer")) b.kernel.kt = *v;
  if (auto v = read<std::size_t>(root, "block.ftheta.kh", "an odd positive integer")) b.kernel.kh = *v;
  if (auto v = read<std::size_t>(root, "block.ftheta.kw", "an odd positive integer")) b.kernel.kw = *v;
  with_field("block.ftheta", [&] {
    b.kernel.validate();
    return 0;
  });
  if (auto v = read<bool>(root, "block.ftheta.bias", "true or false")) b.kernel_bias = *v;
  if (auto v = read<bool>(root, "block.residual_bn", "true or false")) b.residual_bn = *v;
  if (auto v = read<double>(root, "block.bn_gamma", "a number")) b.bn_gamma = *v;
  if (auto v = read<std::string>(root, "block.params", "a directory path")) cfg.params_dir = *v;
  b.channels = syn.shape[3];

  // Oracle.
  if (auto v = read<double>(root, "oracle.tolerance", "a number")) cfg.oracle.tolerance = *v;
  if (auto v = read<bool>(root, "oracle.corrupt", "true or false")) cfg.oracle.corrupt = *v;
  if (auto v = read<std::size_t>(root, "oracle.max_positions", "a positive integer")) cfg.oracle.max_positions = *v;

  // Gradient check.
  if (auto v = read<double>(root, "gradcheck.h", "a positive number")) cfg.gradcheck.h = *v;
  if (!(cfg.gradcheck.h > 0.0)) throw ConfigError("gradcheck.h: must be positive");
  if (auto v = read<double>(root, "gradcheck.tolerance", "a number")) cfg.gradcheck.tolerance = *v;
  if (auto v = read<bool>(root, "gradcheck.randomize_bn", "true or false")) cfg.gradcheck.randomize_bn = *v;

  // Cost.
  if (auto v = read<std::string>(root, "cost.arch", "a file path")) cfg.cost.arch = *v;
  if (auto v = read<std::string>(root, "cost.input", "TxHxWxC")) cfg.cost.input = *v;
  if (auto v = read<std::string>(root, "cost.format", "table or yaml")) {
    if (*v != "table" && *v != "yaml") throw ConfigError("cost.format: expected table or yaml, got '" + *v + "'");
    cfg.cost.format = *v;
  }
  if (auto v = read<bool>(root, "cost.published", "true or false")) cfg.cost.published = *v;
  return cfg;
}

}  // namespace rnl::cli
