#include "uavip/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uavip/error.hpp"

namespace uavip::oracle {
namespace {

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double entropy_of(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    total += w;
  }
  if (total <= 0.0) {
    return 0.0;
  }
  double h = 0.0;
  for (double w : weights) {
    h -= plogp(w / total);
  }
  return h;
}

bool consistent(std::uint32_t pattern, const AnswerVector& history) {
  for (std::size_t m = 0; m < history.size(); ++m) {
    if (history[m] == 0) {
      continue;
    }
    const bool positive = (pattern >> m) & 1U;
    if (positive != (history[m] > 0)) {
      return false;
    }
  }
  return true;
}

void check_history(const JointTable& joint, const AnswerVector& history) {
  if (history.size() != joint.num_queries()) {
    throw ConfigError("oracle: history length differs from the joint's M");
  }
}

}  // namespace

JointTable::JointTable(std::size_t num_classes, std::size_t num_queries, std::vector<double> cells)
    : num_classes_(num_classes), num_queries_(num_queries), cells_(std::move(cells)) {
  if (num_queries_ == 0 || num_queries_ > kMaxQueries) {
    throw ConfigError("joint table: M must lie in [1, " + std::to_string(kMaxQueries) + "]");
  }
  if (cells_.size() != num_classes_ * patterns()) {
    throw ConfigError("joint table: expected K * 2^M cells");
  }
  for (double c : cells_) {
    if (!(c >= 0.0)) {
      throw ConfigError("joint table: negative or NaN cell");
    }
  }
}

double JointTable::total_mass() const {
  double total = 0.0;
  for (double c : cells_) {
    total += c;
  }
  return total;
}

std::uint32_t pattern_of(const AnswerVector& answers) {
  std::uint32_t pattern = 0;
  for (std::size_t m = 0; m < answers.size(); ++m) {
    if (answers[m] > 0) {
      pattern |= std::uint32_t{1} << m;
    }
  }
  return pattern;
}

JointTable build_joint(const data::JointSpec& spec) {
  if (spec.num_queries > kMaxQueries) {
    throw ConfigError("build_joint: M = " + std::to_string(spec.num_queries) +
                      " exceeds the enumeration cap of " + std::to_string(kMaxQueries));
  }
  spec.validate();
  const std::size_t patterns = std::size_t{1} << spec.num_queries;
  std::vector<double> cells(spec.num_classes * patterns);
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    for (std::size_t q = 0; q < patterns; ++q) {
      double p = spec.prior[k];
      for (std::size_t m = 0; m < spec.num_queries; ++m) {
        const Answer answer = ((q >> m) & 1U) ? Answer{1} : Answer{-1};
        const double r = spec.reliability[m];
        p *= answer == spec.truth_table[k][m] ? r : 1.0 - r;
      }
      cells[k * patterns + q] = p;
    }
  }
  return JointTable(spec.num_classes, spec.num_queries, std::move(cells));
}

Posterior posterior(const JointTable& joint, const AnswerVector& history) {
  check_history(joint, history);
  Posterior out;
  out.probs.assign(joint.num_classes(), 0.0);
  double evidence = 0.0;
  for (std::uint32_t q = 0; q < joint.patterns(); ++q) {
    if (!consistent(q, history)) {
      continue;
    }
    for (std::size_t k = 0; k < joint.num_classes(); ++k) {
      out.probs[k] += joint.cell(k, q);
    }
  }
  for (double p : out.probs) {
    evidence += p;
  }
  if (evidence <= 0.0) {
    out.zero_evidence = true;
    out.probs.assign(joint.num_classes(), 1.0 / static_cast<double>(joint.num_classes()));
    return out;
  }
  for (double& p : out.probs) {
    p /= evidence;
  }
  return out;
}

std::vector<double> conditional_mutual_information(const JointTable& joint,
                                                   const AnswerVector& history) {
  check_history(joint, history);
  const std::size_t m_count = joint.num_queries();
  const std::size_t k_count = joint.num_classes();
  // mass[m][side][k] = P(Q_m = side, Y = k, history) (unnormalised).
  std::vector<double> mass(m_count * 2 * k_count, 0.0);
  std::vector<double> label_mass(k_count, 0.0);
  for (std::uint32_t q = 0; q < joint.patterns(); ++q) {
    if (!consistent(q, history)) {
      continue;
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      const double c = joint.cell(k, q);
      if (c == 0.0) {
        continue;
      }
      label_mass[k] += c;
      for (std::size_t m = 0; m < m_count; ++m) {
        mass[(m * 2 + ((q >> m) & 1U)) * k_count + k] += c;
      }
    }
  }
  double evidence = 0.0;
  for (double v : label_mass) {
    evidence += v;
  }
  std::vector<double> mi(m_count, 0.0);
  if (evidence <= 0.0) {
    return mi;
  }
  const double h_y = entropy_of(label_mass);
  for (std::size_t m = 0; m < m_count; ++m) {
    if (history[m] != 0) {
      continue;
    }
    double conditional = 0.0;
    for (std::size_t side = 0; side < 2; ++side) {
      std::vector<double> w(mass.begin() + static_cast<std::ptrdiff_t>((m * 2 + side) * k_count),
                            mass.begin() + static_cast<std::ptrdiff_t>((m * 2 + side + 1) * k_count));
      double side_mass = 0.0;
      for (double v : w) {
        side_mass += v;
      }
      conditional += side_mass / evidence * entropy_of(w);
    }
    mi[m] = std::max(0.0, h_y - conditional);
  }
  return mi;
}

std::optional<std::size_t> greedy_ip_next(const JointTable& joint, const AnswerVector& history,
                                          const std::vector<std::size_t>& available) {
  if (available.empty()) {
    return std::nullopt;
  }
  const auto mi = conditional_mutual_information(joint, history);
  std::vector<std::size_t> order = available;
  std::sort(order.begin(), order.end());
  std::optional<std::size_t> best;
  for (std::size_t m : order) {
    if (m >= joint.num_queries()) {
      throw ConfigError("greedy_ip_next: available index out of range");
    }
    if (!best || mi[m] > mi[*best] + kMiTieTolerance) {
      best = m;
    }
  }
  return best;
}

Mask oracle_mask(const AnswerVector& predicted, const AnswerVector& truth) {
  if (predicted.size() != truth.size()) {
    throw ConfigError("oracle_mask: predicted and true answers differ in length");
  }
  Mask mask(predicted.size(), 0);
  for (std::size_t m = 0; m < predicted.size(); ++m) {
    mask[m] = predicted[m] != truth[m] ? 1 : 0;
  }
  return mask;
}

pursuit::ExplanationTrace greedy_ip_rollout(const JointTable& joint, const AnswerVector& answers,
                                            const Mask& mask,
                                            const pursuit::InferenceConfig& config) {
  const std::size_t m_count = joint.num_queries();
  if (answers.size() != m_count || (!mask.empty() && mask.size() != m_count)) {
    throw ConfigError("greedy_ip_rollout: answers/mask length differ from M");
  }
  const std::size_t budget = config.budget.value_or(m_count);
  Mask live = mask.empty() ? Mask(m_count, 0) : mask;
  AnswerVector history(m_count, 0);
  pursuit::ExplanationTrace trace;
  trace.prior = posterior(joint, history).probs;
  const std::vector<double>* current = &trace.prior;
  while (true) {
    if (*std::max_element(current->begin(), current->end()) >= config.stop_threshold) {
      trace.termination = pursuit::Termination::kConfidence;
      break;
    }
    if (trace.steps.size() >= budget) {
      trace.termination = pursuit::Termination::kExhausted;
      break;
    }
    std::vector<std::size_t> available;
    for (std::size_t m = 0; m < m_count; ++m) {
      if (history[m] == 0 && live[m] == 0) {
        available.push_back(m);
      }
    }
    const auto q = greedy_ip_next(joint, history, available);
    if (!q) {
      trace.termination = pursuit::Termination::kExhausted;
      break;
    }
    if (answers[*q] == 0) {
      live[*q] = 1;
      continue;
    }
    history[*q] = answers[*q];
    trace.steps.push_back({*q, answers[*q], posterior(joint, history).probs});
    current = &trace.steps.back().posterior;
  }
  for (std::size_t m = 0; m < m_count; ++m) {
    if (live[m] != 0) {
      trace.masked.push_back(m);
    }
  }
  const auto& final = trace.final_posterior();
  trace.predicted = static_cast<std::size_t>(std::max_element(final.begin(), final.end()) - final.begin());
  trace.confidence = final[trace.predicted];
  return trace;
}

double bayes_accuracy(const JointTable& joint) {
  double acc = 0.0;
  for (std::uint32_t q = 0; q < joint.patterns(); ++q) {
    double best = 0.0;
    for (std::size_t k = 0; k < joint.num_classes(); ++k) {
      best = std::max(best, joint.cell(k, q));
    }
    acc += best;
  }
  return acc;
}

std::size_t bayes_predict(const JointTable& joint, const AnswerVector& answers) {
  if (answers.size() != joint.num_queries()) {
    throw ConfigError("bayes_predict: answer length differs from M");
  }
  const std::uint32_t q = pattern_of(answers);
  std::size_t best = 0;
  for (std::size_t k = 1; k < joint.num_classes(); ++k) {
    if (joint.cell(k, q) > joint.cell(best, q)) {
      best = k;
    }
  }
  return best;
}

}  // namespace uavip::oracle
