#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uavip/numcore/tensor.hpp"

namespace uavip::numcore {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<Tensor2> first_moment;
  std::vector<Tensor2> second_moment;

  // Moments sized to match `params`, all zero.
  static AdamState fresh(AdamConfig config, std::span<Tensor2* const> params);
};

// One bias-corrected Adam update. The step counter is incremented before the
// bias correction is computed.
void adam_step(std::span<Tensor2* const> params, std::span<const Tensor2> grads, AdamState& state);

}  // namespace uavip::numcore
