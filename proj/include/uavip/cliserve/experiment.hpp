#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uavip/cliserve/config.hpp"
#include "uavip/evalstats.hpp"
#include "uavip/pursuit.hpp"

namespace uavip::cliserve {

struct MethodRun {
  std::string method;
  evalstats::RunMetrics metrics;
  double std_queries = 0.0;
  std::vector<bool> correct;               // per test sample
  std::vector<evalstats::ErrorGroup> groups;
  std::vector<pursuit::ExplanationTrace> traces;  // empty for cbm
  std::optional<pursuit::PursuitModel> model;
  std::optional<pursuit::FullConceptModel> baseline;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<std::string> test_ids;
  std::vector<std::size_t> error_counts;  // wrong answers per test sample
  std::optional<double> mc_threshold;
  std::optional<double> entropy_detection_auc;  // test split, positive = wrong answer
  std::optional<double> mc_detection_auc;
  std::vector<MethodRun> methods;

  const MethodRun& method(const std::string& name) const;
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  evalstats::AggregateReport report;
  // Test samples pooled over seeds.
  std::vector<std::pair<std::string, std::vector<evalstats::ErrorGroup>>> pooled_groups;
};

// Runs one seed without touching the filesystem.
SeedResult run_seed(const ExperimentConfig& config, const data::ConceptDataset& dataset,
                    std::uint64_t seed);

data::ConceptDataset load_dataset(const DatasetConfig& config);

// Every seed, then the aggregate. Writes artifacts under config.output_dir
// when `write_artifacts`; on failure leaves a FAILED marker and rethrows.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_artifacts = true);

// Seed derivation shared by the stages: distinct, stable streams per (base, run seed, stage).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run_seed, std::uint64_t stage);

}  // namespace uavip::cliserve
