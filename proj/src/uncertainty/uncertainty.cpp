#include "uavip/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "text_io.hpp"
#include "uavip/error.hpp"

namespace uavip::uncertainty {

double entropy_bits(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError("entropy_bits: probability " + std::to_string(p) + " outside [0,1]");
  }
  auto term = [](double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; };
  return term(p) + term(1.0 - p);
}

UncertaintyEstimate mc_total_uncertainty(std::span<const double> samples) {
  if (samples.size() < 2) {
    throw ConfigError("mc_total_uncertainty: at least 2 samples required");
  }
  const double n = static_cast<double>(samples.size());
  // Mean accumulated as offsets from the first sample.
  const double origin = samples[0];
  double shift = 0.0;
  double aleatoric = 0.0;
  for (double p : samples) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("mc_total_uncertainty: sample outside [0,1]");
    }
    shift += p - origin;
    aleatoric += p * (1.0 - p);
  }
  const double mean = origin + shift / n;
  aleatoric /= n;
  double epistemic = 0.0;
  for (double p : samples) {
    const double d = p - mean;
    epistemic += d * d;
  }
  epistemic /= n;
  UncertaintyEstimate out;
  out.aleatoric = aleatoric;
  out.epistemic = epistemic;
  out.total = aleatoric + epistemic;
  out.entropy_bits = entropy_bits(std::clamp(mean, 0.0, 1.0));
  return out;
}

Mask compute_mask(std::span<const double> uncertainties, double threshold) {
  if (!std::isfinite(threshold)) {
    throw ConfigError("compute_mask: threshold must be finite");
  }
  Mask mask(uncertainties.size(), 0);
  for (std::size_t m = 0; m < uncertainties.size(); ++m) {
    if (std::isnan(uncertainties[m])) {
      throw ConfigError("compute_mask: NaN uncertainty");
    }
    mask[m] = uncertainties[m] >= threshold ? 1 : 0;
  }
  return mask;
}

const char* to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::kEntropy: return "entropy";
    case MeasureKind::kMonteCarlo: return "montecarlo";
    case MeasureKind::kOracle: return "oracle";
  }
  return "unknown";
}

const char* to_string(McScore score) {
  switch (score) {
    case McScore::kTotal: return "total";
    case McScore::kAleatoric: return "aleatoric";
    case McScore::kEpistemic: return "epistemic";
  }
  return "unknown";
}

McScore mc_score_from_string(const std::string& name) {
  if (name == "total") return McScore::kTotal;
  if (name == "aleatoric") return McScore::kAleatoric;
  if (name == "epistemic") return McScore::kEpistemic;
  throw ConfigError("unknown MC score '" + name + "' (expected total, aleatoric or epistemic)");
}

void UncertaintyConfig::validate() const {
  if (!(entropy_threshold > 0.0 && entropy_threshold <= 1.0)) {
    throw ConfigError("entropy threshold must lie in (0, 1] bits");
  }
}

double entropy_threshold(const UncertaintyConfig& config) {
  config.validate();
  return config.entropy_threshold;
}

namespace {

double pick(const UncertaintyEstimate& e, McScore score) {
  switch (score) {
    case McScore::kTotal: return e.total;
    case McScore::kAleatoric: return e.aleatoric;
    case McScore::kEpistemic: return e.epistemic;
  }
  return e.total;
}

}  // namespace

std::vector<double> UncertaintyTable::entropy_row(std::size_t sample) const {
  std::vector<double> out;
  for (const auto& e : estimates.at(sample)) {
    out.push_back(e.entropy_bits);
  }
  return out;
}

std::vector<double> UncertaintyTable::score_row(std::size_t sample, McScore score) const {
  if (!has_mc) {
    throw ConfigError("Monte-Carlo uncertainty requested but no MC samples are available");
  }
  std::vector<double> out;
  for (const auto& e : estimates.at(sample)) {
    out.push_back(pick(e, score));
  }
  return out;
}

std::vector<double> UncertaintyTable::flat_entropy() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    for (const auto& e : estimates[i]) {
      out.push_back(e.entropy_bits);
    }
  }
  return out;
}

std::vector<double> UncertaintyTable::flat_score(McScore score) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto row = score_row(i, score);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

UncertaintyTable estimate(const concepts::ProbabilitySets& sets) {
  const auto& d = sets.distributions;
  d.validate();
  UncertaintyTable table;
  table.ids = d.ids;
  table.num_queries = d.num_queries;
  table.has_mc = sets.mc.has_value();
  if (sets.mc) {
    sets.mc->validate();
    if (sets.mc->ids != d.ids) {
      throw ConfigError("uncertainty: MC samples and distributions list different samples");
    }
  }
  std::vector<double> column;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<UncertaintyEstimate> row(d.num_queries);
    for (std::size_t m = 0; m < d.num_queries; ++m) {
      if (sets.mc) {
        const auto& s = sets.mc->samples[i];
        column.resize(s.rows());
        for (std::size_t k = 0; k < s.rows(); ++k) {
          column[k] = s(k, m);
        }
        row[m] = mc_total_uncertainty(column);
      }
      row[m].entropy_bits = entropy_bits(d.probs[i][m]);
    }
    table.estimates.push_back(std::move(row));
  }
  return table;
}

UncertaintyMasks entropy_masks(const UncertaintyTable& table, double threshold) {
  UncertaintyMasks out;
  out.kind = MeasureKind::kEntropy;
  out.threshold = threshold;
  for (std::size_t i = 0; i < table.estimates.size(); ++i) {
    out.masks.push_back(compute_mask(table.entropy_row(i), threshold));
  }
  return out;
}

UncertaintyMasks mc_masks(const UncertaintyTable& table, double threshold, McScore score) {
  UncertaintyMasks out;
  out.kind = MeasureKind::kMonteCarlo;
  out.threshold = threshold;
  for (std::size_t i = 0; i < table.estimates.size(); ++i) {
    out.masks.push_back(compute_mask(table.score_row(i, score), threshold));
  }
  return out;
}

ThresholdCalibration calibrate_threshold_mc(std::span<const double> uncertainties,
                                            std::span<const bool> incorrect) {
  if (uncertainties.size() != incorrect.size()) {
    throw ConfigError("calibrate_threshold_mc: score and flag counts differ");
  }
  if (uncertainties.empty()) {
    throw ConfigError("calibrate_threshold_mc: no validation pairs");
  }
  for (double u : uncertainties) {
    if (!std::isfinite(u)) {
      throw ConfigError("calibrate_threshold_mc: non-finite uncertainty");
    }
  }
  const std::size_t positives =
      static_cast<std::size_t>(std::count(incorrect.begin(), incorrect.end(), true));
  const std::size_t negatives = incorrect.size() - positives;
  const auto [lo, hi] = std::minmax_element(uncertainties.begin(), uncertainties.end());

  ThresholdCalibration out;
  if (positives == 0) {
    out.outcome = CalibrationOutcome::kMaskNothing;
    out.threshold = std::nextafter(*hi, std::numeric_limits<double>::infinity());
    out.balanced_accuracy = 1.0;
    out.warning = "every validation answer is correct; threshold set above max(u), nothing masked";
    return out;
  }
  if (negatives == 0) {
    out.outcome = CalibrationOutcome::kMaskEverything;
    out.threshold = *lo;
    out.balanced_accuracy = 1.0;
    out.warning = "every validation answer is incorrect; threshold set to min(u), all masked";
    return out;
  }

  std::vector<std::size_t> order(uncertainties.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return uncertainties[a] < uncertainties[b]; });

  // Sweep: below the cut everything is predicted correct.
  std::size_t correct_below = 0;
  std::size_t incorrect_below = 0;
  bool found = false;
  for (std::size_t i = 0; i < order.size();) {
    const double value = uncertainties[order[i]];
    std::size_t j = i;
    while (j < order.size() && uncertainties[order[j]] == value) {
      if (incorrect[order[j]]) {
        ++incorrect_below;
      } else {
        ++correct_below;
      }
      ++j;
    }
    if (j == order.size()) {
      break;
    }
    const double cut = 0.5 * (value + uncertainties[order[j]]);
    const double tpr = static_cast<double>(positives - incorrect_below) /
                       static_cast<double>(positives);
    const double tnr = static_cast<double>(correct_below) / static_cast<double>(negatives);
    const double balanced = 0.5 * (tpr + tnr);
    out.roc.emplace_back(1.0 - tnr, tpr);
    if (!found || balanced > out.balanced_accuracy) {
      out.threshold = cut;
      out.balanced_accuracy = balanced;
      found = true;
    }
    i = j;
  }
  if (!found) {
    // Single unique value: no midpoint exists; masking everything and nothing tie.
    out.threshold = *lo;
    out.balanced_accuracy = 0.5;
    out.warning = "all validation uncertainties are identical; threshold set to that value";
  }
  return out;
}

void save_uncertainty_dump(const UncertaintyTable& table, const std::vector<Mask>* masks,
                           const std::filesystem::path& path) {
  std::ostringstream out;
  out << "id,query,entropy_bits,aleatoric,epistemic,total,masked\n";
  for (std::size_t i = 0; i < table.estimates.size(); ++i) {
    for (std::size_t m = 0; m < table.num_queries; ++m) {
      const auto& e = table.estimates[i][m];
      out << table.ids[i] << ',' << m << ',' << detail::format_double(e.entropy_bits) << ',';
      if (table.has_mc) {
        out << detail::format_double(e.aleatoric) << ',' << detail::format_double(e.epistemic)
            << ',' << detail::format_double(e.total);
      } else {
        out << ",,";
      }
      out << ',';
      if (masks != nullptr) {
        out << static_cast<int>(masks->at(i).at(m));
      }
      out << '\n';
    }
  }
  detail::write_text(path, out.str());
}

}  // namespace uavip::uncertainty
