#include "uavip/numcore/adam.hpp"

#include <cmath>

#include "uavip/error.hpp"

namespace uavip::numcore {

AdamState AdamState::fresh(AdamConfig config, std::span<Tensor2* const> params) {
  AdamState state;
  state.config = config;
  for (const Tensor2* p : params) {
    state.first_moment.emplace_back(p->rows(), p->cols());
    state.second_moment.emplace_back(p->rows(), p->cols());
  }
  return state;
}

void adam_step(std::span<Tensor2* const> params, std::span<const Tensor2> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ConfigError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first_moment[i]) ||
        !params[i]->same_shape(state.second_moment[i])) {
      throw ConfigError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace uavip::numcore
