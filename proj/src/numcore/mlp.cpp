#include "uavip/numcore/mlp.hpp"

#include <cmath>
#include <string>

#include "uavip/error.hpp"

namespace uavip::numcore {

std::size_t Mlp::input_width() const {
  return layers.empty() ? 0 : layers.front().weights.rows();
}

std::size_t Mlp::output_width() const {
  return layers.empty() ? 0 : layers.back().weights.cols();
}

std::vector<Tensor2*> Mlp::parameters() {
  std::vector<Tensor2*> out;
  out.reserve(layers.size() * 2);
  for (auto& layer : layers) {
    out.push_back(&layer.weights);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Tensor2*> Mlp::parameters() const {
  std::vector<const Tensor2*> out;
  out.reserve(layers.size() * 2);
  for (const auto& layer : layers) {
    out.push_back(&layer.weights);
    out.push_back(&layer.bias);
  }
  return out;
}

Mlp make_mlp(std::size_t input_width, std::span<const std::size_t> hidden, std::size_t output_width,
             Rng& rng) {
  if (input_width == 0 || output_width == 0) {
    throw ConfigError("make_mlp: input and output widths must be positive");
  }
  Mlp mlp;
  std::size_t fan_in = input_width;
  auto add_layer = [&](std::size_t fan_out) {
    if (fan_out == 0) {
      throw ConfigError("make_mlp: hidden width must be positive");
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer{Tensor2(fan_in, fan_out), Tensor2(1, fan_out)};
    for (double& w : layer.weights.data()) {
      w = rng.uniform(-bound, bound);
    }
    for (double& b : layer.bias.data()) {
      b = rng.uniform(-bound, bound);
    }
    mlp.layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (std::size_t width : hidden) {
    add_layer(width);
  }
  add_layer(output_width);
  return mlp;
}

void validate(const Mlp& mlp) {
  if (mlp.layers.empty()) {
    throw ConfigError("mlp: no layers");
  }
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const auto& layer = mlp.layers[i];
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weights.cols()) {
      throw ConfigError("mlp: layer " + std::to_string(i) + " bias shape does not match weights");
    }
    if (i > 0 && mlp.layers[i - 1].weights.cols() != layer.weights.rows()) {
      throw ConfigError("mlp: layer " + std::to_string(i) + " expects " +
                        std::to_string(layer.weights.rows()) + " inputs but previous layer has " +
                        std::to_string(mlp.layers[i - 1].weights.cols()) + " outputs");
    }
  }
}

namespace {

void add_bias_rows(Tensor2& x, const Tensor2& bias) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      row[c] += bias[c];
    }
  }
}

void check_input(const Mlp& mlp, const Tensor2& input) {
  validate(mlp);
  if (input.cols() != mlp.input_width()) {
    throw ConfigError("mlp_forward: input has " + std::to_string(input.cols()) +
                      " columns, network expects " + std::to_string(mlp.input_width()));
  }
}

}  // namespace

Tensor2 mlp_forward(const Mlp& mlp, const Tensor2& input) {
  check_input(mlp, input);
  Tensor2 x = input;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    x = matmul(x, mlp.layers[i].weights);
    add_bias_rows(x, mlp.layers[i].bias);
    if (i + 1 < mlp.layers.size()) {
      for (double& v : x.data()) {
        v = v > 0.0 ? v : 0.0;
      }
    }
  }
  return x;
}

Tensor2 mlp_forward_dropout(const Mlp& mlp, const Tensor2& input, double dropout_rate, Rng& rng) {
  check_input(mlp, input);
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  const double keep_scale = 1.0 / (1.0 - dropout_rate);
  Tensor2 x = input;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    x = matmul(x, mlp.layers[i].weights);
    add_bias_rows(x, mlp.layers[i].bias);
    if (i + 1 < mlp.layers.size()) {
      for (double& v : x.data()) {
        v = v > 0.0 ? v : 0.0;
        v = rng.uniform() < dropout_rate ? 0.0 : v * keep_scale;
      }
    }
  }
  return x;
}

MlpNodes bind(Graph& graph, const Mlp& mlp) {
  validate(mlp);
  MlpNodes nodes;
  for (const Tensor2* p : mlp.parameters()) {
    nodes.params.push_back(graph.parameter(*p));
  }
  return nodes;
}

NodeId mlp_forward(Graph& graph, const Mlp& mlp, const MlpNodes& nodes, NodeId input,
                   Dropout dropout) {
  if (graph.value(input).cols() != mlp.input_width()) {
    throw ConfigError("mlp_forward: input has " + std::to_string(graph.value(input).cols()) +
                      " columns, network expects " + std::to_string(mlp.input_width()));
  }
  const bool use_dropout = dropout.rate > 0.0 && dropout.rng != nullptr;
  const double keep_scale = use_dropout ? 1.0 / (1.0 - dropout.rate) : 1.0;
  NodeId x = input;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    x = graph.add_bias(graph.matmul(x, nodes.params[2 * i]), nodes.params[2 * i + 1]);
    if (i + 1 < mlp.layers.size()) {
      x = graph.relu(x);
      if (use_dropout) {
        const Tensor2& h = graph.value(x);
        Tensor2 mask(h.rows(), h.cols());
        for (double& m : mask.data()) {
          m = dropout.rng->uniform() < dropout.rate ? 0.0 : keep_scale;
        }
        x = graph.mul(x, graph.constant(std::move(mask)));
      }
    }
  }
  return x;
}

std::vector<Tensor2> collect_gradients(const Gradients& grads, const MlpNodes& nodes) {
  std::vector<Tensor2> out;
  out.reserve(nodes.params.size());
  for (NodeId id : nodes.params) {
    out.push_back(grads.of(id));
  }
  return out;
}

}  // namespace uavip::numcore
