#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uavip/rng.hpp"

namespace uavip::numcore {

enum class SelectMode { kArgmax, kSample };

struct Selection {
  std::size_t index = 0;
  std::vector<double> one_hot;
  std::vector<double> soft;  // softmax((logits + noise) / tau) over available entries
};

// Discrete choice over finite logits (entries <= kMaskedThreshold are
// unavailable). Argmax mode is deterministic with ties to the lowest index;
// sample mode perturbs with Gumbel noise. Throws NoAvailableQuery when every
// entry is masked. The taped equivalent is Graph::straight_through.
Selection straight_through_softmax(std::span<const double> logits, double tau, SelectMode mode,
                                   Rng* rng = nullptr);

// Linearly annealed temperature, tau(epoch) = lerp(start, end, epoch / (total - 1)).
class TemperatureSchedule {
 public:
  TemperatureSchedule(double start, double end, std::size_t total_epochs);

  double at(std::size_t epoch) const;
  double start() const noexcept { return start_; }
  double end() const noexcept { return end_; }
  std::size_t total_epochs() const noexcept { return total_; }

 private:
  double start_;
  double end_;
  std::size_t total_;
};

}  // namespace uavip::numcore
