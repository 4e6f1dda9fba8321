#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rnl/aggregation.hpp"
#include "rnl/blocks.hpp"
#include "rnl/ops.hpp"
#include "rnl/tensor.hpp"

namespace rnl::autodiff {

using NodeId = std::size_t;
using Gradients = std::map<NodeId, Tensor<double>>;

enum class OpKind {
  leaf,
  constant,
  matmul,
  transpose,
  softmax_rows,
  relu,
  add,
  hadamard,
  scale,
  sum,
  reshape,
  conv1x1,
  channelwise_conv,
  avg_pool,
  max_pool,
  batch_norm,
  row_normalize,
  mean_rows,
  temporal_shift,
  opaque,
};

std::string to_string(OpKind op);

struct TapeNode {
  OpKind op = OpKind::leaf;
  std::vector<NodeId> inputs;
  Tensor<double> value;
  bool requires_grad = false;
  std::string name;

  // Op attributes and saved forward state.
  double factor = 1.0;
  KernelGeometry geometry;
  ShiftFraction shift;
  std::vector<std::size_t> argmax;
  std::optional<Tensor<double>> bn_mean;
  std::optional<Tensor<double>> bn_var;
  double bn_eps = 0.0;
  std::vector<double> row_norms;
};

// Reverse-mode tape over double tensors. Nodes are recorded in evaluation
// order, so recording order is a topological order. A tape has one owner;
// independent tapes may live on separate threads.
class Tape {
 public:
  NodeId leaf(Tensor<double> value, std::string name = {});
  NodeId constant(Tensor<double> value, std::string name = {});

  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId softmax_rows(NodeId a);
  NodeId relu(NodeId a);
  NodeId add(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId scale(NodeId a, double k);
  NodeId sum(NodeId a);
  NodeId reshape(NodeId a, Shape shape);

  // Rank-4 (T,H,W,C) inputs.
  NodeId conv1x1(NodeId x, NodeId w, std::optional<NodeId> bias = std::nullopt);
  NodeId channelwise_conv(NodeId x, NodeId u, const KernelGeometry& g, std::optional<NodeId> bias = std::nullopt);
  NodeId avg_pool(NodeId x, const KernelGeometry& g);
  NodeId max_pool(NodeId x, const KernelGeometry& g);
  NodeId temporal_shift(NodeId x, ShiftFraction fraction);

  // Normalizes along the last axis; mean/var are fixed inference statistics.
  NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, const Tensor<double>& mean, const Tensor<double>& var,
                    double eps);

  // (P,C) -> rows scaled to unit L2 norm; rows with norm < 1e-12 map to zero.
  NodeId row_normalize(NodeId a);

  // (P,C) -> (1,C) column means.
  NodeId mean_rows(NodeId a);

  // Forward-only node with no backward rule.
  NodeId opaque(std::string name, std::vector<NodeId> inputs, Tensor<double> value);

  const Tensor<double>& value(NodeId id) const { return nodes_.at(id).value; }
  const TapeNode& node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradients of a scalar root, shape (1), for every differentiable leaf.
  Gradients backward(NodeId root) const;

  // Discrete state of every non-smooth op (ReLU input signs, max-pool argmax,
  // zero-norm rows). Two evaluations with equal signatures lie on the same
  // smooth piece.
  std::vector<std::int64_t> kink_signature() const;

 private:
  NodeId push(TapeNode node);
  const Tensor<double>& v(NodeId id) const { return nodes_.at(id).value; }

  std::vector<TapeNode> nodes_;
};

}  // namespace rnl::autodiff
