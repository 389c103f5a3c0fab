#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uavip/types.hpp"

namespace uavip::data {

struct Sample {
  std::string id;
  std::vector<double> features;
  AnswerVector answers;
  std::size_t label = 0;
  // Feature noise level for synthetic samples; not persisted to CSV.
  std::optional<double> noise_sigma;
};

// Samples with binary concept answers in {+1, -1}^M and labels in [0, K).
class ConceptDataset {
 public:
  ConceptDataset() = default;
  ConceptDataset(std::size_t num_queries, std::size_t num_classes, std::vector<Sample> samples);

  std::size_t num_queries() const noexcept { return num_queries_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t feature_width() const noexcept;
  bool has_features() const noexcept { return feature_width() > 0; }

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_.at(i); }
  std::optional<std::size_t> find(const std::string& id) const;

  std::vector<std::size_t> labels() const;
  std::vector<AnswerVector> answers() const;

  ConceptDataset subset(const std::vector<std::size_t>& indices) const;
  // Same samples with replacement answer vectors (one per sample).
  ConceptDataset with_answers(const std::vector<AnswerVector>& answers) const;

 private:
  std::size_t num_queries_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<Sample> samples_;
};

// Header `id,label,c_1,...,c_M[,f_1,...,f_D]`. The class count is the larger
// of `num_classes` and max label + 1.
ConceptDataset load_concept_csv(const std::filesystem::path& path, std::size_t num_classes = 0);
void save_concept_csv(const ConceptDataset& dataset, const std::filesystem::path& path);

struct NoiseMixture {
  double sigma_low = 0.3;
  double sigma_high = 1.5;
  double p_high = 0.2;
};

// Generating joint with concepts conditionally independent given the label.
struct JointSpec {
  std::size_t num_classes = 2;
  std::size_t num_queries = 1;
  std::vector<double> prior;                   // length K, sums to 1
  std::vector<AnswerVector> truth_table;       // K x M signs
  std::vector<double> reliability;             // length M, each in (0.5, 1]
  NoiseMixture noise;

  void validate() const;
};

ConceptDataset synth_generate(const JointSpec& spec, std::size_t n, std::uint64_t seed);

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Split {
  ConceptDataset train;
  ConceptDataset val;
  ConceptDataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  std::vector<std::size_t> test_indices;
  bool stratified = false;
};

// Stratified by label when every present class has at least 3 samples.
Split split(const ConceptDataset& dataset, const SplitSpec& spec);

struct CorruptionLog {
  std::vector<std::string> ids;
  std::vector<std::vector<std::size_t>> flipped;  // sorted, 0-based
};

struct Corrupted {
  ConceptDataset dataset;
  CorruptionLog log;
};

// Flips exactly `flips_per_sample` distinct answers per sample.
Corrupted corrupt_answers(const ConceptDataset& dataset, std::size_t flips_per_sample,
                          std::uint64_t seed);

// Same operation on bare answer vectors (used for predicted answers).
std::vector<std::vector<std::size_t>> corrupt_in_place(std::vector<AnswerVector>& answers,
                                                       const std::vector<std::string>& ids,
                                                       std::size_t flips_per_sample,
                                                       std::uint64_t seed);

// `id,flipped_indices`, indices `;`-separated.
void save_corruption_log(const CorruptionLog& log, const std::filesystem::path& path);
CorruptionLog load_corruption_log(const std::filesystem::path& path);

// Stable 64-bit hash of a sample id; keys per-sample random streams.
std::uint64_t id_hash(const std::string& id);

}  // namespace uavip::data
