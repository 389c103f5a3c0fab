#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "uavip/numcore/tensor.hpp"

namespace uavip::numcore {

using NodeId = std::size_t;

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kAddBias,
  kAdd,
  kMul,
  kScale,
  kRelu,
  kSum,
  kSoftmaxCrossEntropy,
  kSigmoidBce,
  kStraightThrough,
};

const char* op_name(OpKind kind);

// Masked logits are pushed to this value before any softmax; entries at or
// below kMaskedThreshold count as unavailable.
inline constexpr double kMaskedLogit = -1e30;
inline constexpr double kMaskedThreshold = -1e29;

class Gradients;

// Tape of tensor operations evaluated eagerly. Nodes are appended in
// evaluation order, so insertion order is a topological order.
class Graph {
 public:
  NodeId leaf(Tensor2 value, bool requires_grad = false);
  NodeId parameter(Tensor2 value) { return leaf(std::move(value), true); }
  NodeId constant(Tensor2 value) { return leaf(std::move(value), false); }

  NodeId matmul(NodeId a, NodeId b);
  NodeId add_bias(NodeId x, NodeId bias);  // bias is 1 x cols, broadcast over rows
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);          // elementwise
  NodeId scale(NodeId x, double factor);
  NodeId relu(NodeId x);
  NodeId sum(NodeId x);                    // 1 x 1

  // Mean over rows of -log softmax(logits)[label].
  NodeId softmax_cross_entropy(NodeId logits, std::vector<std::size_t> labels);
  // Mean over all entries of binary cross-entropy with logits; targets in [0, 1].
  NodeId sigmoid_bce(NodeId logits, Tensor2 targets);

  // Row-wise straight-through softmax. Forward value is one-hot at
  // argmax(logits + noise) over available entries (lowest index on ties);
  // backward uses the Jacobian of softmax((logits + noise) / tau). A row with
  // no available entry yields a zero row and no gradient. `noise` may be
  // empty (argmax mode) or logits-shaped (Gumbel sample mode).
  NodeId straight_through(NodeId logits, double tau, Tensor2 noise = {});

  const Tensor2& value(NodeId id) const { return nodes_.at(id).value; }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  std::size_t size() const noexcept { return nodes_.size(); }
  // For straight-through nodes: selected column per row, or SIZE_MAX for empty rows.
  const std::vector<std::size_t>& selections(NodeId id) const;

  // Reverse-mode sweep from a 1 x 1 node.
  Gradients backward(NodeId loss) const;

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    NodeId a = 0;
    NodeId b = 0;
    bool requires_grad = false;
    double scalar = 0.0;
    Tensor2 value;
    Tensor2 aux;  // cached softmax / sigmoid values
    std::vector<std::size_t> indices;
  };

  NodeId push(Node node);
  const Node& at(NodeId id) const;

  std::vector<Node> nodes_;
};

class Gradients {
 public:
  // Zero tensor of the node's shape when the node did not influence the loss.
  Tensor2 of(NodeId id) const;
  bool touched(NodeId id) const { return id < grads_.size() && !grads_[id].values().empty(); }

 private:
  friend class Graph;
  std::vector<Tensor2> grads_;
  std::vector<std::pair<std::size_t, std::size_t>> shapes_;
};

}  // namespace uavip::numcore
