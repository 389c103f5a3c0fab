#include <algorithm>
#include <cmath>
#include <string>

#include "uavip/error.hpp"
#include "uavip/numcore/graph.hpp"
#include "uavip/pursuit.hpp"

namespace uavip::pursuit {
namespace {

std::vector<double> softmax_row(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double norm = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - top);
    norm += out[k];
  }
  for (double& v : out) {
    v /= norm;
  }
  return out;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<double> posterior(const PursuitModel& model, const History& history) {
  if (history.num_queries() != model.num_queries) {
    throw ConfigError("posterior: history length differs from the model's M");
  }
  const auto enc = encode_input(history, {});
  const auto logits =
      numcore::mlp_forward(model.classifier, numcore::Tensor2::row_vector(enc.classifier));
  return softmax_row(logits.row(0));
}

std::optional<std::size_t> next_query(const PursuitModel& model, const History& history,
                                      const Mask& mask) {
  const auto enc = encode_input(history, mask);
  const std::size_t m_count = model.num_queries;
  bool any = false;
  for (std::size_t m = 0; m < m_count; ++m) {
    any = any || enc.querier[m_count + m] > 0.0;
  }
  if (!any) {
    return std::nullopt;
  }
  auto logits = numcore::mlp_forward(model.querier, numcore::Tensor2::row_vector(enc.querier));
  for (std::size_t m = 0; m < m_count; ++m) {
    if (enc.querier[m_count + m] == 0.0) {
      logits(0, m) = numcore::kMaskedLogit;
    }
  }
  return numcore::straight_through_softmax(logits.row(0), 1.0, numcore::SelectMode::kArgmax).index;
}

ExplanationTrace infer(const PursuitModel& model, const AnswerVector& answers, const Mask& mask,
                       const InferenceConfig& config) {
  const std::size_t m_count = model.num_queries;
  if (answers.size() != m_count) {
    throw ConfigError("infer: expected " + std::to_string(m_count) + " answers");
  }
  if (!mask.empty() && mask.size() != m_count) {
    throw ConfigError("infer: mask length differs from M");
  }
  const double floor = 1.0 / static_cast<double>(model.num_classes);
  if (!(config.stop_threshold > floor && config.stop_threshold <= 1.0)) {
    throw ConfigError("infer: stop threshold must lie in (1/K, 1]");
  }
  const std::size_t budget = config.budget.value_or(m_count);
  if (budget > m_count) {
    throw ConfigError("infer: budget exceeds the number of queries");
  }

  Mask live = mask.empty() ? Mask(m_count, 0) : mask;
  History history(m_count);
  ExplanationTrace trace;
  trace.prior = posterior(model, history);
  const std::vector<double>* current = &trace.prior;
  while (true) {
    if (*std::max_element(current->begin(), current->end()) >= config.stop_threshold) {
      trace.termination = Termination::kConfidence;
      break;
    }
    if (history.size() >= budget) {
      trace.termination = Termination::kExhausted;
      break;
    }
    const auto q = next_query(model, history, live);
    if (!q) {
      trace.termination = Termination::kExhausted;
      break;
    }
    const Answer a = answers[*q];
    if (a == 0) {
      live[*q] = 1;
      continue;
    }
    history.record(*q, a);
    trace.steps.push_back({*q, a, posterior(model, history)});
    current = &trace.steps.back().posterior;
  }
  for (std::size_t m = 0; m < m_count; ++m) {
    if (live[m] != 0) {
      trace.masked.push_back(m);
    }
  }
  const auto& final = trace.final_posterior();
  trace.predicted = argmax(final);
  trace.confidence = final[trace.predicted];
  return trace;
}

std::vector<double> full_concept_posterior(const FullConceptModel& model,
                                           const AnswerVector& answers) {
  if (answers.size() != model.num_queries) {
    throw ConfigError("full_concept_posterior: expected " + std::to_string(model.num_queries) +
                      " answers");
  }
  std::vector<double> x(answers.begin(), answers.end());
  const auto logits = numcore::mlp_forward(model.classifier, numcore::Tensor2::row_vector(x));
  return softmax_row(logits.row(0));
}

BatchResult batch_explain(const PursuitModel& model, const std::vector<std::string>& ids,
                          const std::vector<AnswerVector>& answers, const std::vector<Mask>& masks,
                          const std::vector<std::size_t>& labels, const InferenceConfig& config) {
  if (ids.size() != answers.size() || labels.size() != answers.size() ||
      (!masks.empty() && masks.size() != answers.size())) {
    throw ConfigError("batch_explain: ids, answers, masks and labels must align");
  }
  BatchResult out;
  std::size_t hits = 0;
  double total_queries = 0.0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    auto trace = infer(model, answers[i], masks.empty() ? Mask{} : masks[i], config);
    trace.id = ids[i];
    hits += trace.predicted == labels[i] ? 1 : 0;
    total_queries += static_cast<double>(trace.steps.size());
    out.traces.push_back(std::move(trace));
  }
  const std::size_t n = out.traces.size();
  out.summary.count = n;
  if (n > 0) {
    out.summary.mean_queries = total_queries / static_cast<double>(n);
    out.summary.accuracy = static_cast<double>(hits) / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& t : out.traces) {
      const double d = static_cast<double>(t.steps.size()) - out.summary.mean_queries;
      ss += d * d;
    }
    out.summary.std_queries = std::sqrt(ss / static_cast<double>(n));
  }
  return out;
}

}  // namespace uavip::pursuit
