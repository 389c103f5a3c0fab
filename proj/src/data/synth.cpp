#include <cmath>
#include <string>

#include "uavip/data.hpp"
#include "uavip/error.hpp"
#include "uavip/rng.hpp"

namespace uavip::data {

void JointSpec::validate() const {
  if (num_classes < 1 || num_queries < 1) {
    throw ConfigError("joint spec: K and M must be positive");
  }
  if (prior.size() != num_classes) {
    throw ConfigError("joint spec: prior has " + std::to_string(prior.size()) + " entries, K = " +
                      std::to_string(num_classes));
  }
  double total = 0.0;
  for (double p : prior) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ConfigError("joint spec: prior entries must be non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("joint spec: prior sums to " + std::to_string(total) + ", not 1");
  }
  if (truth_table.size() != num_classes) {
    throw ConfigError("joint spec: truth table needs one row per class");
  }
  for (const auto& row : truth_table) {
    if (row.size() != num_queries) {
      throw ConfigError("joint spec: truth table rows need M entries");
    }
    for (Answer a : row) {
      if (a != 1 && a != -1) {
        throw ConfigError("joint spec: truth table entries must be +1 or -1");
      }
    }
  }
  if (reliability.size() != num_queries) {
    throw ConfigError("joint spec: reliability needs M entries");
  }
  for (double r : reliability) {
    if (!(r > 0.5 && r <= 1.0)) {
      throw ConfigError("joint spec: reliability must lie in (0.5, 1]");
    }
  }
  if (!(noise.sigma_low >= 0.0) || !(noise.sigma_high >= 0.0) ||
      !(noise.p_high >= 0.0 && noise.p_high <= 1.0)) {
    throw ConfigError("joint spec: invalid noise mixture");
  }
}

ConceptDataset synth_generate(const JointSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) {
    throw ConfigError("synth_generate: n must be at least 1");
  }
  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    Sample s;
    s.id = "s" + std::to_string(i);
    s.label = rng.categorical(spec.prior);
    s.answers.resize(spec.num_queries);
    for (std::size_t m = 0; m < spec.num_queries; ++m) {
      const Answer truth = spec.truth_table[s.label][m];
      s.answers[m] = rng.bernoulli(spec.reliability[m]) ? truth : static_cast<Answer>(-truth);
    }
    const double sigma =
        rng.bernoulli(spec.noise.p_high) ? spec.noise.sigma_high : spec.noise.sigma_low;
    s.noise_sigma = sigma;
    s.features.resize(spec.num_queries);
    for (std::size_t m = 0; m < spec.num_queries; ++m) {
      s.features[m] = static_cast<double>(s.answers[m]) + sigma * rng.normal();
    }
    samples.push_back(std::move(s));
  }
  return ConceptDataset(spec.num_queries, spec.num_classes, std::move(samples));
}

}  // namespace uavip::data
