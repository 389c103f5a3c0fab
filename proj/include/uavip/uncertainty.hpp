#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uavip/concepts.hpp"
#include "uavip/types.hpp"

namespace uavip::uncertainty {

// Binary entropy in bits with 0 log 0 = 0.
double entropy_bits(double p);

struct UncertaintyEstimate {
  double aleatoric = 0.0;     // mean of p(1 - p) over passes
  double epistemic = 0.0;     // population variance of p over passes
  double total = 0.0;         // aleatoric + epistemic
  double entropy_bits = 0.0;  // entropy of the point prediction
};

// Monte-Carlo decomposition; entropy_bits is filled from the sample mean.
UncertaintyEstimate mc_total_uncertainty(std::span<const double> samples);

// Omega_m = 1 iff u_m >= threshold.
Mask compute_mask(std::span<const double> uncertainties, double threshold);

enum class MeasureKind { kEntropy, kMonteCarlo, kOracle };
const char* to_string(MeasureKind kind);

// Score used to threshold Monte-Carlo uncertainty.
enum class McScore { kTotal, kAleatoric, kEpistemic };
const char* to_string(McScore score);
McScore mc_score_from_string(const std::string& name);

struct UncertaintyConfig {
  double entropy_threshold = 0.95;
  McScore mc_score = McScore::kTotal;

  void validate() const;
};

// Configured T_E; validates (0, 1].
double entropy_threshold(const UncertaintyConfig& config);

struct UncertaintyMasks {
  std::vector<Mask> masks;
  double threshold = 0.0;
  MeasureKind kind = MeasureKind::kEntropy;
};

// Per (sample, query) estimates. Entropy always comes from the point
// prediction; the Monte-Carlo fields are present only with MC samples.
struct UncertaintyTable {
  std::vector<std::string> ids;
  std::size_t num_queries = 0;
  std::vector<std::vector<UncertaintyEstimate>> estimates;
  bool has_mc = false;

  std::vector<double> entropy_row(std::size_t sample) const;
  std::vector<double> score_row(std::size_t sample, McScore score) const;
  // Flattened over (sample, query), sample-major.
  std::vector<double> flat_entropy() const;
  std::vector<double> flat_score(McScore score) const;
};

UncertaintyTable estimate(const concepts::ProbabilitySets& sets);

UncertaintyMasks entropy_masks(const UncertaintyTable& table, double threshold);
UncertaintyMasks mc_masks(const UncertaintyTable& table, double threshold, McScore score);

enum class CalibrationOutcome { kFitted, kMaskNothing, kMaskEverything };

struct ThresholdCalibration {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
  std::vector<std::pair<double, double>> roc;  // (false positive rate, true positive rate) per candidate
  CalibrationOutcome outcome = CalibrationOutcome::kFitted;
  std::optional<std::string> warning;
};

// Single-threshold classifier for answer incorrectness: incorrect iff u >= T.
// Candidates are midpoints between sorted unique u values; the chosen T
// maximises balanced accuracy, ties going to the smaller T.
ThresholdCalibration calibrate_threshold_mc(std::span<const double> uncertainties,
                                            std::span<const bool> incorrect);

// `id,query,entropy_bits,aleatoric,epistemic,total,masked`; MC columns empty
// when absent. `masks` may be null.
void save_uncertainty_dump(const UncertaintyTable& table, const std::vector<Mask>* masks,
                           const std::filesystem::path& path);

}  // namespace uavip::uncertainty
