#include <algorithm>
#include <cmath>

#include "uavip/concepts.hpp"
#include "uavip/error.hpp"
#include "uavip/rng.hpp"

namespace uavip::concepts {

void SimulatorConfig::validate() const {
  if (!(accuracy > 0.5 && accuracy <= 1.0)) {
    throw ConfigError("simulator: accuracy must lie in (0.5, 1]");
  }
  if (!(ambiguity >= 0.0 && ambiguity <= 1.0)) {
    throw ConfigError("simulator: ambiguity rate must lie in [0, 1]");
  }
  if (!(band_low > 0.0 && band_low <= band_high && band_high < 1.0)) {
    throw ConfigError("simulator: ambiguous band must satisfy 0 < low <= high < 1");
  }
  if (!(confident_mean > 0.5 && confident_mean < 1.0) || !(concentration > 0.0)) {
    throw ConfigError("simulator: confident Beta needs mean in (0.5, 1) and positive concentration");
  }
  if (passes < 2) {
    throw ConfigError("simulator: at least 2 MC passes required");
  }
  if (!(jitter_confident >= 0.0) || !(jitter_wrong >= 0.0) || !(jitter_ambiguous >= 0.0)) {
    throw ConfigError("simulator: jitter scales must be non-negative");
  }
}

namespace {

double logit_of(double p) {
  const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(q / (1.0 - q));
}

}  // namespace

SimulatedAnswers simulate_answers(const data::ConceptDataset& dataset,
                                  const SimulatorConfig& config) {
  config.validate();
  const std::size_t m_count = dataset.num_queries();
  SimulatedAnswers out;
  out.distributions.num_queries = m_count;
  out.mc.num_queries = m_count;
  out.mc.num_passes = config.passes;
  const double alpha = config.confident_mean * config.concentration;
  const double beta = (1.0 - config.confident_mean) * config.concentration;

  for (const data::Sample& s : dataset.samples()) {
    Rng rng = Rng::stream(config.seed, data::id_hash(s.id));
    std::vector<double> probs(m_count);
    std::vector<bool> correct(m_count);
    std::vector<bool> ambiguous(m_count);
    numcore::Tensor2 passes(config.passes, m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      const bool truth_positive = s.answers[m] > 0;
      double p = 0.0;
      double jitter = 0.0;
      if (rng.bernoulli(config.ambiguity)) {
        ambiguous[m] = true;
        p = rng.uniform(config.band_low, config.band_high);
        jitter = config.jitter_ambiguous;
      } else {
        const double favoured = rng.beta(alpha, beta);
        const bool right = rng.bernoulli(config.accuracy);
        p = (truth_positive == right) ? favoured : 1.0 - favoured;
        jitter = right ? config.jitter_confident : config.jitter_wrong;
      }
      probs[m] = p;
      correct[m] = answer_from_probability(p) == s.answers[m];
      const double centre = logit_of(p);
      for (std::size_t k = 0; k < config.passes; ++k) {
        passes(k, m) = logistic(centre + jitter * rng.normal());
      }
    }
    out.distributions.ids.push_back(s.id);
    out.distributions.probs.push_back(std::move(probs));
    out.mc.ids.push_back(s.id);
    out.mc.samples.push_back(std::move(passes));
    out.correct.push_back(std::move(correct));
    out.ambiguous.push_back(std::move(ambiguous));
  }
  return out;
}

}  // namespace uavip::concepts
