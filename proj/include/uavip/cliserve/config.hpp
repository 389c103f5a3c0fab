#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavip/concepts.hpp"
#include "uavip/data.hpp"
#include "uavip/pursuit.hpp"
#include "uavip/uncertainty.hpp"

namespace uavip::cliserve {

enum class DatasetSource { kSynth, kCsv };
enum class AnswerSource { kTruth, kConceptModel, kSimulator, kImport };

const char* to_string(DatasetSource s);
const char* to_string(AnswerSource s);

// A default synthetic joint: K classes, M queries, reliabilities spread over
// [0.95, 0.6] in a fixed shuffled order, class signatures drawn from `seed`.
data::JointSpec default_joint(std::size_t num_classes, std::size_t num_queries, std::uint64_t seed);

struct SynthConfig {
  data::JointSpec spec = default_joint(2, 8, 0);
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
};

struct DatasetConfig {
  DatasetSource source = DatasetSource::kSynth;
  std::string csv_path;
  std::size_t num_classes = 0;  // csv only; 0 infers from labels
  SynthConfig synth;
};

struct AnswerConfig {
  AnswerSource source = AnswerSource::kSimulator;
  std::string import_path;
  concepts::SimulatorConfig simulator;
  concepts::ConceptModelConfig concept_model;
  std::size_t mc_passes = 30;  // concept_model source
};

// Each sample gets j flips, j drawn uniformly from `flips`, on both the
// training and the evaluation answers.
struct CorruptionConfig {
  std::vector<std::size_t> flips;  // empty disables corruption
};

struct UncertaintySettings {
  double entropy_threshold = 0.95;
  uncertainty::McScore mc_score = uncertainty::McScore::kTotal;
  std::optional<double> mc_threshold;  // calibrated on the validation split when absent
};

struct ExperimentConfig {
  DatasetConfig dataset;
  AnswerConfig answers;
  CorruptionConfig corruption;
  std::vector<std::string> methods{"vip", "uav_entropy", "uav_mc", "uav_oracle", "cbm"};
  std::string reference = "uav_mc";
  UncertaintySettings uncertainty;
  pursuit::TrainingConfig training;
  pursuit::InferenceConfig inference;
  data::SplitSpec split;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<std::size_t> error_bins{0, 1, 2};
  std::string output_dir = "uavip_out";
  bool save_checkpoints = true;
  bool save_traces = true;
  std::size_t threads = 1;

  void validate() const;
};

// Method names: the pursuit variants plus "cbm" (full-concept baseline).
bool is_known_method(const std::string& name);

// Strict: unknown keys and wrong types throw ConfigError naming the key path.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

// Pieces reused by individual subcommands.
data::JointSpec joint_spec_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json joint_spec_to_json(const data::JointSpec& spec);
pursuit::TrainingConfig training_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json training_to_json(const pursuit::TrainingConfig& config);
concepts::SimulatorConfig simulator_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json simulator_to_json(const concepts::SimulatorConfig& config);

}  // namespace uavip::cliserve
