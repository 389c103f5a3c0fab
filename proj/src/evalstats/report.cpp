#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "uavip/error.hpp"
#include "uavip/evalstats.hpp"

namespace uavip::evalstats {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string cell(const MetricSummary& s) {
  return s.std ? fixed(s.mean, 2) + " ± " + fixed(*s.std, 2) : fixed(s.mean, 2);
}

std::string pad(const std::string& s, std::size_t width) {
  // Display width: count UTF-8 lead bytes only.
  std::size_t shown = 0;
  for (unsigned char c : s) {
    shown += (c & 0xC0U) != 0x80U ? 1 : 0;
  }
  return shown >= width ? s : s + std::string(width - shown, ' ');
}

}  // namespace

MetricSummary summarize(const std::vector<double>& values) {
  if (values.empty()) {
    throw ConfigError("summarize: no values");
  }
  MetricSummary out;
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - out.mean) * (v - out.mean);
    }
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

AggregateReport aggregate_runs(
    const std::vector<std::pair<std::string, std::vector<RunMetrics>>>& runs,
    const std::string& reference) {
  if (runs.empty()) {
    throw ConfigError("aggregate_runs: no methods");
  }
  const std::size_t count = runs.front().second.size();
  for (const auto& [name, metrics] : runs) {
    if (metrics.size() != count || count == 0) {
      throw ConfigError("aggregate_runs: method '" + name + "' has " +
                        std::to_string(metrics.size()) + " runs, expected " +
                        std::to_string(count));
    }
  }
  AggregateReport report;
  report.reference = reference;
  const std::vector<RunMetrics>* ref = nullptr;
  for (const auto& [name, metrics] : runs) {
    if (name == reference) {
      ref = &metrics;
    }
  }
  if (ref == nullptr) {
    report.warnings.push_back("reference method '" + reference + "' absent; no p-values");
  }
  for (const auto& [name, metrics] : runs) {
    MethodSummary s;
    s.method = name;
    s.runs = count;
    std::vector<double> acc, auc_v, f1, queries;
    for (const auto& m : metrics) {
      acc.push_back(m.accuracy);
      auc_v.push_back(m.auc);
      f1.push_back(m.macro_f1);
      queries.push_back(m.mean_queries);
    }
    s.accuracy = summarize(acc);
    s.auc = summarize(auc_v);
    s.macro_f1 = summarize(f1);
    s.mean_queries = summarize(queries);
    if (ref != nullptr && name != reference) {
      std::vector<double> ref_acc;
      for (const auto& m : *ref) {
        ref_acc.push_back(m.accuracy);
      }
      const auto w = wilcoxon_signed_rank(acc, ref_acc);
      s.p_value = w.p_value;
      if (w.warning) {
        report.warnings.push_back(name + ": " + *w.warning);
      }
    }
    report.methods.push_back(std::move(s));
  }
  return report;
}

std::string report_csv(const AggregateReport& report) {
  std::ostringstream out;
  out << "method,runs,accuracy_mean,accuracy_std,auc_mean,auc_std,queries_mean,queries_std,"
         "f1_mean,f1_std,p_value\n";
  auto put = [&](const MetricSummary& s) {
    out << fixed(s.mean, 4) << ',' << (s.std ? fixed(*s.std, 4) : "");
  };
  for (const auto& m : report.methods) {
    out << m.method << ',' << m.runs << ',';
    put(m.accuracy);
    out << ',';
    put(m.auc);
    out << ',';
    put(m.mean_queries);
    out << ',';
    put(m.macro_f1);
    out << ',' << (m.p_value ? fixed(*m.p_value, 6) : "") << '\n';
  }
  return out.str();
}

std::string report_text(const AggregateReport& report) {
  std::ostringstream out;
  const std::size_t w = 18;
  out << pad("Method", 14) << pad("Accuracy", w) << pad("AUC", w) << pad("Queries", w)
      << pad("F1 Score", w) << "P-Value\n";
  for (const auto& m : report.methods) {
    out << pad(m.method, 14) << pad(cell(m.accuracy), w) << pad(cell(m.auc), w)
        << pad(cell(m.mean_queries), w) << pad(cell(m.macro_f1), w)
        << (m.p_value ? fixed(*m.p_value, 4) : (m.method == report.reference ? "ref" : "-"))
        << '\n';
  }
  for (const auto& warning : report.warnings) {
    out << "warning: " << warning << '\n';
  }
  return out.str();
}

std::string error_groups_csv(const std::vector<ErrorGroup>& groups) {
  std::ostringstream out;
  out << "group,n,accuracy\n";
  for (const auto& g : groups) {
    out << g.name << ',' << g.n << ',' << (g.accuracy ? fixed(*g.accuracy * 100.0, 2) : "") << '\n';
  }
  return out.str();
}

}  // namespace uavip::evalstats
