#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uavip/numcore/mlp.hpp"
#include "uavip/numcore/straight_through.hpp"
#include "uavip/types.hpp"

namespace uavip::pursuit {

// Query-answer history: answers[m] is 0 while query m is unasked.
class History {
 public:
  explicit History(std::size_t num_queries) : answers_(num_queries, 0) {}

  void record(std::size_t query, Answer answer);
  bool asked(std::size_t query) const { return answers_.at(query) != 0; }
  std::size_t size() const noexcept { return order_.size(); }
  std::size_t num_queries() const noexcept { return answers_.size(); }
  const AnswerVector& answers() const noexcept { return answers_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }

 private:
  AnswerVector answers_;
  std::vector<std::size_t> order_;
};

struct EncodedInput {
  std::vector<double> classifier;  // h, length M
  std::vector<double> querier;     // [h, a], length 2M; a_m = 1 iff unasked and unmasked
};

// An empty mask means nothing is masked.
EncodedInput encode_input(const History& history, const Mask& mask);

enum class Variant { kVip, kUavEntropy, kUavMc, kUavOracle };
const char* to_string(Variant v);
Variant variant_from_string(const std::string& name);

struct TrainingConfig {
  std::size_t epochs = 200;
  double lr = 1e-4;
  std::size_t batch_size = 64;
  double tau_start = 1.0;
  double tau_end = 0.2;
  std::vector<std::size_t> hidden{128, 128};
  numcore::SelectMode select_mode = numcore::SelectMode::kArgmax;
  // Extra epochs whose histories are rolled out by the current querier.
  std::size_t sequential_epochs = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PursuitModel {
  numcore::Mlp querier;     // 2M -> M logits
  numcore::Mlp classifier;  // M -> K logits
  std::size_t num_queries = 0;
  std::size_t num_classes = 0;
  TrainingConfig config;
  Variant variant = Variant::kVip;
  // Mask threshold the model was trained with (T_E or T_MC); unused for vip/oracle.
  std::optional<double> mask_threshold;
  std::string mc_score = "total";
  std::vector<double> loss_curve;
  double final_val_loss = 0.0;

  void validate() const;
};

// Answers per sample (the answer source the model sees), labels, and optional
// masks. Empty `masks` is the unmasked objective.
struct PursuitData {
  std::size_t num_queries = 0;
  std::size_t num_classes = 0;
  std::vector<AnswerVector> answers;
  std::vector<std::size_t> labels;
  std::vector<Mask> masks;

  std::size_t size() const noexcept { return answers.size(); }
  void validate() const;
};

// Joint querier/classifier training. Per sample: uniform history length over
// the unmasked queries, uniform random history of that length, one
// straight-through querier step, cross-entropy of the classifier on the
// extended history. Adam; temperature annealed linearly over epochs.
PursuitModel train_pursuit(const PursuitData& train, const PursuitData& val,
                           const TrainingConfig& config, Variant variant = Variant::kVip);

// Same objective compiled without any mask handling. Kept as the reference
// that the masked path must reproduce bit-for-bit when every mask is zero.
PursuitModel train_pursuit_unmasked(const PursuitData& train, const PursuitData& val,
                                    const TrainingConfig& config);

// Random-history objective on `data` with a fixed evaluation stream.
double evaluate_objective(const PursuitModel& model, const PursuitData& data, double tau,
                          std::uint64_t seed);

std::vector<double> posterior(const PursuitModel& model, const History& history);

// Argmax of the querier over available queries (lowest index on ties).
std::optional<std::size_t> next_query(const PursuitModel& model, const History& history,
                                      const Mask& mask);

enum class Termination { kConfidence, kExhausted };
const char* to_string(Termination t);

struct TraceStep {
  std::size_t query = 0;
  Answer answer = 0;
  std::vector<double> posterior;
};

struct ExplanationTrace {
  std::string id;
  std::vector<double> prior;  // posterior on the empty history
  std::vector<TraceStep> steps;
  std::vector<std::size_t> masked;  // sorted; includes queries skipped as "not sure"
  Termination termination = Termination::kExhausted;
  std::size_t predicted = 0;
  double confidence = 0.0;

  const std::vector<double>& final_posterior() const {
    return steps.empty() ? prior : steps.back().posterior;
  }
};

struct InferenceConfig {
  double stop_threshold = 0.85;
  std::optional<std::size_t> budget;  // default M
};

// Sequential pursuit. `answers[m] == 0` means the answer is "not sure": the
// query is masked when selected and another is chosen.
ExplanationTrace infer(const PursuitModel& model, const AnswerVector& answers, const Mask& mask,
                       const InferenceConfig& config);

// CBM-style classifier on all M answers at once.
struct FullConceptModel {
  numcore::Mlp classifier;
  std::size_t num_queries = 0;
  std::size_t num_classes = 0;
  TrainingConfig config;
  std::vector<double> loss_curve;
};

FullConceptModel train_full_concept_baseline(const PursuitData& train, const PursuitData& val,
                                             const TrainingConfig& config);
std::vector<double> full_concept_posterior(const FullConceptModel& model,
                                           const AnswerVector& answers);

struct BatchSummary {
  std::size_t count = 0;
  double mean_queries = 0.0;
  double std_queries = 0.0;
  double accuracy = 0.0;  // fraction in [0, 1]
};

struct BatchResult {
  std::vector<ExplanationTrace> traces;
  BatchSummary summary;
};

BatchResult batch_explain(const PursuitModel& model, const std::vector<std::string>& ids,
                          const std::vector<AnswerVector>& answers, const std::vector<Mask>& masks,
                          const std::vector<std::size_t>& labels, const InferenceConfig& config);

}  // namespace uavip::pursuit
