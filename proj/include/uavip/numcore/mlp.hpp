#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uavip/numcore/graph.hpp"
#include "uavip/numcore/tensor.hpp"
#include "uavip/rng.hpp"

namespace uavip::numcore {

struct DenseLayer {
  Tensor2 weights;  // in x out
  Tensor2 bias;     // 1 x out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Rectifier on hidden layers, identity on the output layer.
struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::vector<Tensor2*> parameters();
  std::vector<const Tensor2*> parameters() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Mlp make_mlp(std::size_t input_width, std::span<const std::size_t> hidden, std::size_t output_width,
             Rng& rng);

// Throws ConfigError unless consecutive layers chain.
void validate(const Mlp& mlp);

// Inference-only forward pass (no tape).
Tensor2 mlp_forward(const Mlp& mlp, const Tensor2& input);

// Forward pass with inverted dropout on hidden activations; each call draws
// fresh dropout masks from `rng`.
Tensor2 mlp_forward_dropout(const Mlp& mlp, const Tensor2& input, double dropout_rate, Rng& rng);

// Parameter nodes of an Mlp bound into a graph, in Mlp::parameters() order.
struct MlpNodes {
  std::vector<NodeId> params;
};

MlpNodes bind(Graph& graph, const Mlp& mlp);

struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
};

// Taped forward pass; returns the logits node.
NodeId mlp_forward(Graph& graph, const Mlp& mlp, const MlpNodes& nodes, NodeId input,
                   Dropout dropout = {});

// Gradients for every parameter, in Mlp::parameters() order.
std::vector<Tensor2> collect_gradients(const Gradients& grads, const MlpNodes& nodes);

}  // namespace uavip::numcore
