#include "uavip/numcore/straight_through.hpp"

#include <cmath>

#include "uavip/error.hpp"
#include "uavip/numcore/graph.hpp"

namespace uavip::numcore {

Selection straight_through_softmax(std::span<const double> logits, double tau, SelectMode mode,
                                   Rng* rng) {
  if (!(tau > 0.0)) {
    throw ConfigError("straight_through_softmax: temperature must be positive");
  }
  if (mode == SelectMode::kSample && rng == nullptr) {
    throw ConfigError("straight_through_softmax: sample mode needs a generator");
  }
  std::vector<double> perturbed(logits.begin(), logits.end());
  bool any = false;
  std::size_t best = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] <= kMaskedThreshold) {
      continue;
    }
    if (mode == SelectMode::kSample) {
      perturbed[i] += rng->gumbel();
    }
    if (!any || perturbed[i] > perturbed[best]) {
      best = i;
      any = true;
    }
  }
  if (!any) {
    throw NoAvailableQuery();
  }
  Selection out;
  out.index = best;
  out.one_hot.assign(logits.size(), 0.0);
  out.one_hot[best] = 1.0;
  out.soft.assign(logits.size(), 0.0);
  double norm = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] > kMaskedThreshold) {
      out.soft[i] = std::exp((perturbed[i] - perturbed[best]) / tau);
      norm += out.soft[i];
    }
  }
  for (double& s : out.soft) {
    s /= norm;
  }
  return out;
}

TemperatureSchedule::TemperatureSchedule(double start, double end, std::size_t total_epochs)
    : start_(start), end_(end), total_(total_epochs) {
  if (!(start > 0.0) || !(end > 0.0)) {
    throw ConfigError("temperature schedule: endpoints must be positive");
  }
  if (end > start) {
    throw ConfigError("temperature schedule: annealing must be non-increasing");
  }
}

double TemperatureSchedule::at(std::size_t epoch) const {
  if (total_ <= 1) {
    return start_;
  }
  if (epoch >= total_ - 1) {
    return end_;
  }
  const double fraction = static_cast<double>(epoch) / static_cast<double>(total_ - 1);
  return std::lerp(start_, end_, fraction);
}

}  // namespace uavip::numcore
