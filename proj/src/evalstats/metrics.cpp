#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

#include "uavip/error.hpp"
#include "uavip/evalstats.hpp"

namespace uavip::evalstats {
namespace {

// Midranks (1-based) of `values`.
std::vector<double> midranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) {
      ++j;
    }
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      ranks[order[t]] = rank;
    }
    i = j;
  }
  return ranks;
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ConfigError("auc: scores and labels differ in length");
  }
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) {
      throw ConfigError("auc: labels must be 0 or 1");
    }
    positives += static_cast<std::size_t>(l);
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw std::domain_error("auc: undefined with a single class present");
  }
  for (double s : scores) {
    if (std::isnan(s)) {
      throw ConfigError("auc: NaN score");
    }
  }
  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      rank_sum += ranks[i];
    }
  }
  const double np = static_cast<double>(positives);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(negatives));
}

MulticlassAuc multiclass_auc(const std::vector<std::vector<double>>& posteriors,
                             const std::vector<std::size_t>& labels) {
  if (posteriors.size() != labels.size() || posteriors.empty()) {
    throw ConfigError("multiclass_auc: need one posterior per label");
  }
  const std::size_t k_count = posteriors.front().size();
  if (k_count < 2) {
    throw ConfigError("multiclass_auc: K must be at least 2");
  }
  MulticlassAuc out;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < k_count; ++k) {
    std::vector<double> scores(labels.size());
    std::vector<int> binary(labels.size());
    std::size_t present = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (posteriors[i].size() != k_count) {
        throw ConfigError("multiclass_auc: ragged posteriors");
      }
      scores[i] = posteriors[i][k];
      binary[i] = labels[i] == k ? 1 : 0;
      present += static_cast<std::size_t>(binary[i]);
    }
    if (present == 0) {
      out.excluded_classes.push_back(k);
      continue;
    }
    if (present == labels.size()) {
      throw std::domain_error("multiclass_auc: only one class present in labels");
    }
    total += auc(scores, binary);
    ++used;
  }
  out.value = total / static_cast<double>(used);
  return out;
}

double accuracy(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw ConfigError("accuracy: predictions and labels must be non-empty and equal length");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += predictions[i] == labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double macro_f1(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels,
                std::size_t num_classes) {
  if (predictions.size() != labels.size() || labels.empty() || num_classes == 0) {
    throw ConfigError("macro_f1: predictions and labels must be non-empty and equal length");
  }
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] >= num_classes || labels[i] >= num_classes) {
      throw ConfigError("macro_f1: class index out of range");
    }
    if (predictions[i] == labels[i]) {
      ++tp[labels[i]];
    } else {
      ++fp[predictions[i]];
      ++fn[labels[i]];
    }
  }
  double total = 0.0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const std::size_t denom = 2 * tp[k] + fp[k] + fn[k];
    if (tp[k] > 0 && denom > 0) {
      total += 2.0 * static_cast<double>(tp[k]) / static_cast<double>(denom);
    }
  }
  return total / static_cast<double>(num_classes);
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ConfigError("wilcoxon: paired samples differ in length");
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (std::isnan(d)) {
      throw ConfigError("wilcoxon: NaN difference");
    }
    if (d != 0.0) {
      diffs.push_back(d);
    }
  }
  WilcoxonResult out;
  out.n_used = diffs.size();
  if (diffs.empty()) {
    out.warning = "all differences are zero; p set to 1";
    return out;
  }
  std::vector<double> magnitudes(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    magnitudes[i] = std::fabs(diffs[i]);
  }
  const auto ranks = midranks(magnitudes);
  const std::size_t n = diffs.size();
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) {
      w_plus += ranks[i];
    }
  }
  out.statistic = w_plus;
  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;

  if (n <= kExactWilcoxonLimit) {
    out.exact = true;
    // Doubled ranks are integers, so the comparison is exact.
    std::vector<std::int64_t> doubled(n);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = static_cast<std::int64_t>(std::llround(2.0 * ranks[i]));
      total += doubled[i];
    }
    std::int64_t observed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (diffs[i] > 0.0) {
        observed += doubled[i];
      }
    }
    // Deviation from the null mean, doubled again to stay integral.
    const std::int64_t observed_dev = std::llabs(2 * observed - total);
    std::uint64_t extreme = 0;
    const std::uint64_t assignments = std::uint64_t{1} << n;
    for (std::uint64_t bits = 0; bits < assignments; ++bits) {
      std::int64_t w = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if ((bits >> i) & 1U) {
          w += doubled[i];
        }
      }
      if (std::llabs(2 * w - total) >= observed_dev) {
        ++extreme;
      }
    }
    out.p_value = static_cast<double>(extreme) / static_cast<double>(assignments);
    return out;
  }

  double tie_term = 0.0;
  std::vector<double> sorted = magnitudes;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && sorted[j] == sorted[i]) {
      ++j;
    }
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double variance = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  if (variance <= 0.0) {
    out.p_value = 1.0;
    out.warning = "degenerate variance; p set to 1";
    return out;
  }
  const double z = (w_plus - mean) / std::sqrt(variance);
  out.p_value = std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
  return out;
}

std::vector<ErrorGroup> accuracy_by_error_count(const std::vector<bool>& correct,
                                                const std::vector<std::size_t>& error_counts,
                                                const std::vector<std::size_t>& bins) {
  if (correct.size() != error_counts.size()) {
    throw ConfigError("accuracy_by_error_count: correctness and counts differ in length");
  }
  if (bins.empty() || bins.front() != 0 || !std::is_sorted(bins.begin(), bins.end()) ||
      std::adjacent_find(bins.begin(), bins.end()) != bins.end()) {
    throw ConfigError("accuracy_by_error_count: bins must be strictly ascending from 0");
  }
  std::vector<ErrorGroup> groups(bins.size());
  std::vector<std::size_t> hits(bins.size(), 0);
  for (std::size_t g = 0; g < bins.size(); ++g) {
    const bool last = g + 1 == bins.size();
    if (last) {
      groups[g].name = bins[g] == 0 ? ">=0" : ">=" + std::to_string(bins[g]);
    } else if (bins[g + 1] == bins[g] + 1) {
      groups[g].name = std::to_string(bins[g]);
    } else {
      groups[g].name = std::to_string(bins[g]) + "-" + std::to_string(bins[g + 1] - 1);
    }
  }
  for (std::size_t i = 0; i < correct.size(); ++i) {
    const auto it = std::upper_bound(bins.begin(), bins.end(), error_counts[i]);
    const auto g = static_cast<std::size_t>(it - bins.begin()) - 1;
    ++groups[g].n;
    hits[g] += correct[i] ? 1 : 0;
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].n > 0) {
      groups[g].accuracy = static_cast<double>(hits[g]) / static_cast<double>(groups[g].n);
    }
  }
  return groups;
}

double correctness_detection_auc(const std::vector<double>& uncertainty,
                                 const std::vector<bool>& answer_correct) {
  if (uncertainty.size() != answer_correct.size()) {
    throw ConfigError("correctness_detection_auc: inputs differ in length");
  }
  std::vector<int> incorrect(answer_correct.size());
  for (std::size_t i = 0; i < answer_correct.size(); ++i) {
    incorrect[i] = answer_correct[i] ? 0 : 1;
  }
  return auc(uncertainty, incorrect);
}

}  // namespace uavip::evalstats
