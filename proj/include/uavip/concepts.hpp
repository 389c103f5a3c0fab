#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uavip/data.hpp"
#include "uavip/numcore/mlp.hpp"
#include "uavip/numcore/tensor.hpp"

namespace uavip::concepts {

// Per-sample probability that each query's answer is +1.
struct AnswerDistributionSet {
  std::size_t num_queries = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> probs;

  std::size_t size() const noexcept { return probs.size(); }
  void validate() const;
  std::vector<AnswerVector> predicted_answers() const;
};

// S Monte-Carlo probability vectors per sample, stored as S x M tensors.
struct MCSampleSet {
  std::size_t num_queries = 0;
  std::size_t num_passes = 0;
  std::vector<std::string> ids;
  std::vector<numcore::Tensor2> samples;

  std::size_t size() const noexcept { return samples.size(); }
  void validate() const;
};

struct ConceptModelConfig {
  std::vector<std::size_t> hidden{128, 128};
  std::size_t epochs = 100;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  double dropout = 0.2;
  std::uint64_t seed = 0;
};

struct ConceptModelParams {
  numcore::Mlp mlp;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::vector<double> loss_curve;  // mean training loss per epoch
};

// Minimises mean per-concept binary cross-entropy of features -> answers.
ConceptModelParams train_concept_model(const data::ConceptDataset& train,
                                       const ConceptModelConfig& config);

// Dropout disabled; deterministic.
AnswerDistributionSet predict_distributions(const ConceptModelParams& model,
                                            const data::ConceptDataset& samples);

// S stochastic passes with dropout active. Each sample draws from its own
// stream derived from (seed, id), so results do not depend on sample order.
MCSampleSet mc_sample_distributions(const ConceptModelParams& model,
                                    const data::ConceptDataset& samples, std::size_t passes,
                                    std::uint64_t seed);

struct SimulatorConfig {
  double accuracy = 0.9;        // a: confident answers match the truth with this probability
  double ambiguity = 0.3;       // rho: share of ambiguous (sample, query) entries
  double band_low = 0.35;       // ambiguous p ~ U(band_low, band_high)
  double band_high = 0.65;
  double confident_mean = 0.95; // Beta mean for the favoured side of confident entries
  double concentration = 40.0;  // Beta alpha + beta
  std::size_t passes = 30;      // S
  // Logit-space MC jitter: confident-correct, confident-wrong, ambiguous.
  double jitter_confident = 0.3;
  double jitter_wrong = 1.5;
  double jitter_ambiguous = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimulatedAnswers {
  AnswerDistributionSet distributions;
  MCSampleSet mc;
  std::vector<std::vector<bool>> correct;    // round(p) matches the dataset answer
  std::vector<std::vector<bool>> ambiguous;  // entry drawn from the ambiguous band
};

SimulatedAnswers simulate_answers(const data::ConceptDataset& dataset,
                                  const SimulatorConfig& config);

struct ProbabilitySets {
  AnswerDistributionSet distributions;
  std::optional<MCSampleSet> mc;
};

// First line `id,<M>,<S>`; per sample `id,p_1,...,p_M` followed, when S > 0,
// by S lines `id,s,p_1^(s),...,p_M^(s)` with s = 1..S. Reals use 17
// significant digits.
void export_probabilities(const ProbabilitySets& sets, const std::filesystem::path& path);
ProbabilitySets import_probabilities(const std::filesystem::path& path);

// Correctness of round(p) against reference answers.
std::vector<std::vector<bool>> answer_correctness(const AnswerDistributionSet& dists,
                                                  const std::vector<AnswerVector>& truth);

// Rows reordered to follow `ids`; throws when an id is missing.
ProbabilitySets select_ids(const ProbabilitySets& sets, const std::vector<std::string>& ids);

double logistic(double logit);

}  // namespace uavip::concepts
