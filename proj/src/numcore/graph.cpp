#include "uavip/numcore/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "uavip/error.hpp"

namespace uavip::numcore {
namespace {

constexpr std::size_t kNoSelection = std::numeric_limits<std::size_t>::max();

std::string shape_of(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_of(a) + " vs " + shape_of(b));
  }
}

void accumulate(Tensor2& into, const Tensor2& delta) {
  if (into.values().empty()) {
    into = delta;
    return;
  }
  auto dst = into.data();
  auto src = delta.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] += src[i];
  }
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kRelu: return "relu";
    case OpKind::kSum: return "sum";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::kSigmoidBce: return "sigmoid_bce";
    case OpKind::kStraightThrough: return "straight_through";
  }
  return "unknown";
}

NodeId Graph::push(Node node) {
  if (!node.value.all_finite()) {
    throw NumericalError(std::string("non-finite forward value at node ") +
                         std::to_string(nodes_.size()) + " (" + op_name(node.kind) + ")");
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const Graph::Node& Graph::at(NodeId id) const {
  if (id >= nodes_.size()) {
    throw ConfigError("graph: unknown node " + std::to_string(id));
  }
  return nodes_[id];
}

NodeId Graph::leaf(Tensor2 value, bool requires_grad) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.requires_grad = requires_grad;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kMatMul;
  n.a = a;
  n.b = b;
  n.value = numcore::matmul(at(a).value, at(b).value);
  return push(std::move(n));
}

NodeId Graph::add_bias(NodeId x, NodeId bias) {
  const Tensor2& xv = at(x).value;
  const Tensor2& bv = at(bias).value;
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ConfigError("add_bias: bias " + shape_of(bv) + " does not fit input " + shape_of(xv));
  }
  Node n;
  n.kind = OpKind::kAddBias;
  n.a = x;
  n.b = bias;
  n.value = xv;
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto row = n.value.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      row[c] += bv[c];
    }
  }
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor2& av = at(a).value;
  const Tensor2& bv = at(b).value;
  require_same_shape(av, bv, "add");
  Node n;
  n.kind = OpKind::kAdd;
  n.a = a;
  n.b = b;
  n.value = av;
  auto out = n.value.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += bv[i];
  }
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor2& av = at(a).value;
  const Tensor2& bv = at(b).value;
  require_same_shape(av, bv, "mul");
  Node n;
  n.kind = OpKind::kMul;
  n.a = a;
  n.b = b;
  n.value = av;
  auto out = n.value.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] *= bv[i];
  }
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double factor) {
  Node n;
  n.kind = OpKind::kScale;
  n.a = x;
  n.scalar = factor;
  n.value = at(x).value;
  for (double& v : n.value.data()) {
    v *= factor;
  }
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
  Node n;
  n.kind = OpKind::kRelu;
  n.a = x;
  n.value = at(x).value;
  for (double& v : n.value.data()) {
    v = v > 0.0 ? v : 0.0;
  }
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n;
  n.kind = OpKind::kSum;
  n.a = x;
  double total = 0.0;
  for (double v : at(x).value.data()) {
    total += v;
  }
  n.value = Tensor2::scalar(total);
  return push(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId logits, std::vector<std::size_t> labels) {
  const Tensor2& z = at(logits).value;
  if (labels.size() != z.rows()) {
    throw ConfigError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                      " labels for " + std::to_string(z.rows()) + " rows");
  }
  Node n;
  n.kind = OpKind::kSoftmaxCrossEntropy;
  n.a = logits;
  n.aux = Tensor2(z.rows(), z.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (labels[r] >= z.cols()) {
      throw ConfigError("softmax_cross_entropy: label out of range");
    }
    auto row = z.row(r);
    const double top = *std::max_element(row.begin(), row.end());
    double norm = 0.0;
    for (double v : row) {
      norm += std::exp(v - top);
    }
    const double log_norm = top + std::log(norm);
    auto soft = n.aux.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      soft[c] = std::exp(row[c] - log_norm);
    }
    loss += log_norm - row[labels[r]];
  }
  n.value = Tensor2::scalar(loss / static_cast<double>(z.rows()));
  n.indices = std::move(labels);
  return push(std::move(n));
}

NodeId Graph::sigmoid_bce(NodeId logits, Tensor2 targets) {
  const Tensor2& z = at(logits).value;
  require_same_shape(z, targets, "sigmoid_bce");
  Node n;
  n.kind = OpKind::kSigmoidBce;
  n.a = logits;
  n.aux = Tensor2(z.rows(), z.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x = z[i];
    const double t = targets[i];
    loss += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    n.aux[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  n.value = Tensor2::scalar(loss / static_cast<double>(z.size()));
  // aux holds sigmoid(z) - t, the unnormalised gradient.
  for (std::size_t i = 0; i < z.size(); ++i) {
    n.aux[i] -= targets[i];
  }
  return push(std::move(n));
}

NodeId Graph::straight_through(NodeId logits, double tau, Tensor2 noise) {
  if (!(tau > 0.0)) {
    throw ConfigError("straight_through: temperature must be positive");
  }
  const Tensor2& z = at(logits).value;
  if (!noise.values().empty()) {
    require_same_shape(z, noise, "straight_through noise");
  }
  Node n;
  n.kind = OpKind::kStraightThrough;
  n.a = logits;
  n.scalar = tau;
  n.value = Tensor2(z.rows(), z.cols());
  n.aux = Tensor2(z.rows(), z.cols());
  n.indices.assign(z.rows(), kNoSelection);
  std::vector<double> perturbed(z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    std::size_t best = kNoSelection;
    for (std::size_t c = 0; c < row.size(); ++c) {
      perturbed[c] = row[c] + (noise.values().empty() ? 0.0 : noise(r, c));
      if (row[c] <= kMaskedThreshold) {
        continue;
      }
      if (best == kNoSelection || perturbed[c] > perturbed[best]) {
        best = c;
      }
    }
    if (best == kNoSelection) {
      continue;
    }
    n.indices[r] = best;
    n.value(r, best) = 1.0;
    double norm = 0.0;
    auto soft = n.aux.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      soft[c] = row[c] <= kMaskedThreshold ? 0.0 : std::exp((perturbed[c] - perturbed[best]) / tau);
      norm += soft[c];
    }
    for (double& s : soft) {
      s /= norm;
    }
  }
  return push(std::move(n));
}

const std::vector<std::size_t>& Graph::selections(NodeId id) const {
  const Node& n = at(id);
  if (n.kind != OpKind::kStraightThrough) {
    throw ConfigError("selections: node is not a straight-through node");
  }
  return n.indices;
}

Tensor2 Gradients::of(NodeId id) const {
  if (touched(id)) {
    return grads_[id];
  }
  if (id >= shapes_.size()) {
    throw ConfigError("gradients: unknown node " + std::to_string(id));
  }
  return Tensor2(shapes_[id].first, shapes_[id].second);
}

Gradients Graph::backward(NodeId loss) const {
  const Node& root = at(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ConfigError("backward: loss node " + std::to_string(loss) + " is not scalar (" +
                      shape_of(root.value) + ")");
  }
  Gradients out;
  out.grads_.resize(nodes_.size());
  out.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    out.shapes_.emplace_back(n.value.rows(), n.value.cols());
  }
  auto& g = out.grads_;
  g[loss] = Tensor2::scalar(1.0);

  for (std::size_t k = loss + 1; k-- > 0;) {
    if (g[k].values().empty()) {
      continue;
    }
    if (!g[k].all_finite()) {
      throw NumericalError("non-finite gradient at node " + std::to_string(k) + " (" +
                           op_name(nodes_[k].kind) + ")");
    }
    const Node& n = nodes_[k];
    const Tensor2& up = g[k];
    switch (n.kind) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatMul: {
        const Tensor2& av = nodes_[n.a].value;
        const Tensor2& bv = nodes_[n.b].value;
        // dA = dC * B^T
        Tensor2 da(av.rows(), av.cols());
        for (std::size_t i = 0; i < av.rows(); ++i) {
          auto up_row = up.row(i);
          auto da_row = da.row(i);
          for (std::size_t p = 0; p < av.cols(); ++p) {
            auto b_row = bv.row(p);
            double acc = 0.0;
            for (std::size_t j = 0; j < bv.cols(); ++j) {
              acc += up_row[j] * b_row[j];
            }
            da_row[p] = acc;
          }
        }
        // dB = A^T * dC
        Tensor2 db(bv.rows(), bv.cols());
        for (std::size_t i = 0; i < av.rows(); ++i) {
          auto a_row = av.row(i);
          const double* up_row = up.row(i).data();
          for (std::size_t p = 0; p < av.cols(); ++p) {
            const double s = a_row[p];
            if (s == 0.0) {
              continue;
            }
            double* db_row = db.row(p).data();
            for (std::size_t j = 0; j < bv.cols(); ++j) {
              db_row[j] += s * up_row[j];
            }
          }
        }
        accumulate(g[n.a], da);
        accumulate(g[n.b], db);
        break;
      }
      case OpKind::kAddBias: {
        Tensor2 db(1, up.cols());
        for (std::size_t r = 0; r < up.rows(); ++r) {
          auto row = up.row(r);
          for (std::size_t c = 0; c < row.size(); ++c) {
            db[c] += row[c];
          }
        }
        accumulate(g[n.a], up);
        accumulate(g[n.b], db);
        break;
      }
      case OpKind::kAdd:
        accumulate(g[n.a], up);
        accumulate(g[n.b], up);
        break;
      case OpKind::kMul: {
        const Tensor2& av = nodes_[n.a].value;
        const Tensor2& bv = nodes_[n.b].value;
        Tensor2 da = up;
        Tensor2 db = up;
        for (std::size_t i = 0; i < up.size(); ++i) {
          da[i] *= bv[i];
          db[i] *= av[i];
        }
        accumulate(g[n.a], da);
        accumulate(g[n.b], db);
        break;
      }
      case OpKind::kScale: {
        Tensor2 dx = up;
        for (double& v : dx.data()) {
          v *= n.scalar;
        }
        accumulate(g[n.a], dx);
        break;
      }
      case OpKind::kRelu: {
        const Tensor2& xv = nodes_[n.a].value;
        Tensor2 dx = up;
        for (std::size_t i = 0; i < dx.size(); ++i) {
          if (!(xv[i] > 0.0)) {
            dx[i] = 0.0;
          }
        }
        accumulate(g[n.a], dx);
        break;
      }
      case OpKind::kSum: {
        const Tensor2& xv = nodes_[n.a].value;
        accumulate(g[n.a], Tensor2(xv.rows(), xv.cols(), up[0]));
        break;
      }
      case OpKind::kSoftmaxCrossEntropy: {
        Tensor2 dz = n.aux;
        const double w = up[0] / static_cast<double>(dz.rows());
        for (std::size_t r = 0; r < dz.rows(); ++r) {
          dz(r, n.indices[r]) -= 1.0;
        }
        for (double& v : dz.data()) {
          v *= w;
        }
        accumulate(g[n.a], dz);
        break;
      }
      case OpKind::kSigmoidBce: {
        Tensor2 dz = n.aux;
        const double w = up[0] / static_cast<double>(dz.size());
        for (double& v : dz.data()) {
          v *= w;
        }
        accumulate(g[n.a], dz);
        break;
      }
      case OpKind::kStraightThrough: {
        Tensor2 dz(up.rows(), up.cols());
        for (std::size_t r = 0; r < up.rows(); ++r) {
          if (n.indices[r] == kNoSelection) {
            continue;
          }
          auto soft = n.aux.row(r);
          auto up_row = up.row(r);
          double dot = 0.0;
          for (std::size_t c = 0; c < soft.size(); ++c) {
            dot += soft[c] * up_row[c];
          }
          auto dz_row = dz.row(r);
          for (std::size_t c = 0; c < soft.size(); ++c) {
            dz_row[c] = soft[c] * (up_row[c] - dot) / n.scalar;
          }
        }
        accumulate(g[n.a], dz);
        break;
      }
    }
  }
  return out;
}

}  // namespace uavip::numcore
