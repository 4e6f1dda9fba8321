#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rnl/aggregation.hpp"
#include "rnl/blocks.hpp"

namespace rnl::arch {

struct Dims {
  std::uint64_t t = 1, h = 1, w = 1, c = 1;

  std::uint64_t positions() const { return t * h * w; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);
// "8x224x224x3" -> Dims.
Dims parse_dims(const std::string& text);

struct Extent3 {
  std::uint64_t t = 1, h = 1, w = 1;
  bool operator==(const Extent3&) const = default;
};

struct ConvOp {
  Extent3 kernel;
  std::uint64_t out_channels = 0;
  Extent3 stride;
  bool batch_norm = true;
  bool bias = false;
  bool operator==(const ConvOp&) const = default;
};

enum class PoolKind { max, avg };

struct PoolOp {
  PoolKind kind = PoolKind::max;
  Extent3 kernel;
  Extent3 stride;
  bool operator==(const PoolOp&) const = default;
};

// ResNet bottleneck [1x1 mid, 1x3x3 mid, 1x1 out] x repeat. The first block
// carries the stride on its 3x3 conv and a projection shortcut when the
// channel count or resolution changes.
struct BottleneckOp {
  std::uint64_t mid_channels = 0;
  std::uint64_t out_channels = 0;
  std::uint64_t repeat = 1;
  Extent3 stride;
  bool operator==(const BottleneckOp&) const = default;
};

using StageOp = std::variant<ConvOp, PoolOp, BottleneckOp>;

// Attention blocks placed after the residual blocks at `positions`.
struct AttentionInsertion {
  BlockKind kind = BlockKind::rnl;
  std::uint64_t count = 0;
  std::vector<std::uint64_t> positions;
  std::uint64_t reduction = 2;
  AggregationMode mode = AggregationMode::channelwise_conv;
  KernelGeometry kernel{3, 7, 7};
  bool residual_bn = true;
  bool operator==(const AttentionInsertion&) const = default;
};

struct Stage {
  std::string name;
  std::vector<StageOp> ops;
  std::vector<AttentionInsertion> attention;
  bool operator==(const Stage&) const = default;
};

struct ArchSpec {
  std::vector<Stage> stages;
  std::uint64_t classes = 0;  // 0: no classifier
  bool operator==(const ArchSpec&) const = default;
};

// conv1, pool1, res2..res5 of a ResNet-50 backbone with a `classes`-way classifier.
ArchSpec resnet50_spec(std::uint64_t classes = 400);

// `count` blocks spread over `repeat` residual blocks, ending at the last one:
// positions floor((k+1)*repeat/count) - 1.
std::vector<std::uint64_t> default_positions(std::uint64_t count, std::uint64_t repeat);

// Adds an insertion to the named stage, filling default positions.
ArchSpec with_attention(ArchSpec spec, const std::string& stage, AttentionInsertion insertion);

// The five-block layout: 2 in res3 and 3 in res4.
ArchSpec with_five_blocks(ArchSpec spec, AttentionInsertion prototype);

struct StageShape {
  std::string name;
  Dims output;
};

std::vector<StageShape> propagate_shapes(const ArchSpec& spec, const Dims& input);

struct Cost {
  std::uint64_t params = 0;
  std::uint64_t flops = 0;  // 1 multiply-accumulate = 1 FLOP
  Cost& operator+=(const Cost& o) {
    params += o.params;
    flops += o.flops;
    return *this;
  }
  bool operator==(const Cost&) const = default;
};

struct StageCost {
  std::string name;
  Dims output;
  Cost backbone;
  Cost attention;
  Cost total() const {
    Cost c = backbone;
    c += attention;
    return c;
  }
};

struct CostReport {
  std::vector<StageCost> stages;
  Cost classifier;
  Cost total;
};

// Cost of one attention block acting on a clip of shape `at`.
Cost attention_block_cost(const AttentionInsertion& block, const Dims& at);

CostReport count_cost(const ArchSpec& spec, const Dims& input);

// Line-oriented text form. parse_arch(emit_arch(s)) == s.
std::string emit_arch(const ArchSpec& spec);
ArchSpec parse_arch(const std::string& text);
ArchSpec load_arch(const std::string& path);

// Published cost figures next to what this model counts for the same layout.
struct PublishedComparison {
  std::string label;
  Cost counted;
  double published_params_m = 0.0;
  double published_gflops = 0.0;
  std::string note;
};

std::vector<PublishedComparison> published_comparisons();

}  // namespace rnl::arch
