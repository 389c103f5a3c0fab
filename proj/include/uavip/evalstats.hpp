#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace uavip::evalstats {

// Mann-Whitney AUC with midrank ties. Throws if either class is absent.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MulticlassAuc {
  double value = 0.0;
  std::vector<std::size_t> excluded_classes;  // absent from labels
};

// One-vs-rest AUC per class present in `labels`, macro-averaged.
// posteriors[i][k] = P(class k | sample i).
MulticlassAuc multiclass_auc(const std::vector<std::vector<double>>& posteriors,
                             const std::vector<std::size_t>& labels);

double accuracy(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels);

// Undefined per-class F1 counts as 0. Classes are 0..num_classes-1.
double macro_f1(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels,
                std::size_t num_classes);

struct WilcoxonResult {
  double p_value = 1.0;
  double statistic = 0.0;  // W+ (sum of ranks of positive differences)
  std::size_t n_used = 0;  // after dropping zero differences
  bool exact = false;
  std::optional<std::string> warning;
};

// Two-sided. Exact enumeration over 2^n sign flips for n <= 12, normal
// approximation with tie correction above.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

inline constexpr std::size_t kExactWilcoxonLimit = 12;

struct ErrorGroup {
  std::string name;
  std::size_t n = 0;
  std::optional<double> accuracy;
};

// Bins are lower bounds, ascending, starting at 0; the last bin is open.
// Default bins {0, 1, 2} give the groups "0", "1", ">=2".
std::vector<ErrorGroup> accuracy_by_error_count(const std::vector<bool>& correct,
                                                const std::vector<std::size_t>& error_counts,
                                                const std::vector<std::size_t>& bins = {0, 1, 2});

// Positive class is an incorrect answer.
double correctness_detection_auc(const std::vector<double>& uncertainty,
                                 const std::vector<bool>& answer_correct);

struct RunMetrics {
  double accuracy = 0.0;  // percent
  double auc = 0.0;       // percent
  double macro_f1 = 0.0;  // percent
  double mean_queries = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> std;  // sample std; needs >= 2 runs
};

struct MethodSummary {
  std::string method;
  std::size_t runs = 0;
  MetricSummary accuracy;
  MetricSummary auc;
  MetricSummary macro_f1;
  MetricSummary mean_queries;
  std::optional<double> p_value;  // accuracy vs the reference method
};

struct AggregateReport {
  std::string reference;
  std::vector<MethodSummary> methods;
  std::vector<std::string> warnings;
};

// Methods keep the order given. Every method must have the same run count.
AggregateReport aggregate_runs(const std::vector<std::pair<std::string, std::vector<RunMetrics>>>& runs,
                               const std::string& reference = "uav_mc");

MetricSummary summarize(const std::vector<double>& values);

std::string report_csv(const AggregateReport& report);
std::string report_text(const AggregateReport& report);
std::string error_groups_csv(const std::vector<ErrorGroup>& groups);

}  // namespace uavip::evalstats
