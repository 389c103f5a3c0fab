#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "uavip/error.hpp"
#include "uavip/numcore/adam.hpp"
#include "uavip/numcore/graph.hpp"
#include "uavip/pursuit.hpp"
#include "uavip/rng.hpp"

namespace uavip::pursuit {

void TrainingConfig::validate() const {
  if (batch_size == 0) {
    throw ConfigError("training: batch size must be positive");
  }
  if (!(lr > 0.0)) {
    throw ConfigError("training: learning rate must be positive");
  }
  numcore::TemperatureSchedule(tau_start, tau_end, epochs);
}

void PursuitModel::validate() const {
  numcore::validate(querier);
  numcore::validate(classifier);
  if (querier.input_width() != 2 * num_queries || querier.output_width() != num_queries) {
    throw ConfigError("pursuit model: querier must map 2M inputs to M logits");
  }
  if (classifier.input_width() != num_queries || classifier.output_width() != num_classes) {
    throw ConfigError("pursuit model: classifier must map M inputs to K logits");
  }
}

void PursuitData::validate() const {
  if (num_queries == 0 || num_classes == 0) {
    throw ConfigError("pursuit data: M and K must be positive");
  }
  if (labels.size() != answers.size()) {
    throw ConfigError("pursuit data: label count does not match answer count");
  }
  if (!masks.empty() && masks.size() != answers.size()) {
    throw ConfigError("pursuit data: mask count does not match answer count");
  }
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (answers[i].size() != num_queries) {
      throw ConfigError("pursuit data: answer vector " + std::to_string(i) + " has wrong length");
    }
    for (Answer a : answers[i]) {
      if (a != 1 && a != -1) {
        throw ConfigError("pursuit data: answers must be +1 or -1");
      }
    }
    if (labels[i] >= num_classes) {
      throw ConfigError("pursuit data: label out of range");
    }
    if (!masks.empty() && masks[i].size() != num_queries) {
      throw ConfigError("pursuit data: mask " + std::to_string(i) + " has wrong length");
    }
  }
}

namespace {

using numcore::Tensor2;

struct Batch {
  Tensor2 history;
  Tensor2 querier_input;
  Tensor2 answers;
  Tensor2 mask_logits;
  std::vector<std::size_t> labels;

  Batch(std::size_t rows, std::size_t m_count)
      : history(rows, m_count),
        querier_input(rows, 2 * m_count),
        answers(rows, m_count),
        mask_logits(rows, m_count) {
    labels.reserve(rows);
  }
};

// Which queries the history of row `r` draws from. The unmasked
// instantiation never reads masks.
template <bool kMasked>
void available_queries(const PursuitData& data, std::size_t sample, std::vector<std::size_t>& out) {
  out.clear();
  for (std::size_t m = 0; m < data.num_queries; ++m) {
    if constexpr (kMasked) {
      if (!data.masks.empty() && data.masks[sample][m] != 0) {
        continue;
      }
    }
    out.push_back(m);
  }
}

void write_row(const PursuitData& data, std::size_t sample, const History& h,
               const std::vector<std::size_t>& avail, Batch& batch, std::size_t r) {
  const std::size_t m_count = data.num_queries;
  std::vector<bool> open(m_count, false);
  for (std::size_t m : avail) {
    open[m] = !h.asked(m);
  }
  for (std::size_t m = 0; m < m_count; ++m) {
    const double hv = static_cast<double>(h.answers()[m]);
    batch.history(r, m) = hv;
    batch.querier_input(r, m) = hv;
    batch.querier_input(r, m_count + m) = open[m] ? 1.0 : 0.0;
    batch.answers(r, m) = static_cast<double>(data.answers[sample][m]);
    batch.mask_logits(r, m) = open[m] ? 0.0 : numcore::kMaskedLogit;
  }
  batch.labels.push_back(data.labels[sample]);
}

// Uniform history length over the available queries, then a uniform subset.
template <bool kMasked>
void random_history_row(const PursuitData& data, std::size_t sample, Rng& rng, Batch& batch,
                        std::size_t r, std::vector<std::size_t>& avail) {
  available_queries<kMasked>(data, sample, avail);
  const std::size_t t = rng.uniform_index(avail.size() + 1);
  std::vector<std::size_t> pool = avail;
  History h(data.num_queries);
  for (std::size_t k = 0; k < t; ++k) {
    std::swap(pool[k], pool[k + rng.uniform_index(pool.size() - k)]);
    h.record(pool[k], data.answers[sample][pool[k]]);
  }
  write_row(data, sample, h, avail, batch, r);
}

// History rolled out by the current querier for a uniform number of steps.
template <bool kMasked>
void rollout_history_row(const PursuitModel& model, const PursuitData& data, std::size_t sample,
                         Rng& rng, Batch& batch, std::size_t r, std::vector<std::size_t>& avail) {
  available_queries<kMasked>(data, sample, avail);
  const std::size_t t = rng.uniform_index(avail.size() + 1);
  Mask mask(data.num_queries, 1);
  for (std::size_t m : avail) {
    mask[m] = 0;
  }
  History h(data.num_queries);
  for (std::size_t k = 0; k < t; ++k) {
    const auto q = next_query(model, h, mask);
    if (!q) {
      break;
    }
    h.record(*q, data.answers[sample][*q]);
  }
  write_row(data, sample, h, avail, batch, r);
}

// Forward (and optionally backward + Adam) on one batch.
double run_batch(PursuitModel& model, const Batch& batch, double tau, Rng& rng,
                 numcore::AdamState* adam) {
  numcore::Graph g;
  const auto qn = numcore::bind(g, model.querier);
  const auto cn = numcore::bind(g, model.classifier);
  const auto q_in = g.constant(batch.querier_input);
  const auto q_logits = numcore::mlp_forward(g, model.querier, qn, q_in);
  const auto masked = g.add(q_logits, g.constant(batch.mask_logits));
  Tensor2 noise;
  if (model.config.select_mode == numcore::SelectMode::kSample) {
    noise = Tensor2(batch.answers.rows(), batch.answers.cols());
    for (double& v : noise.data()) {
      v = rng.gumbel();
    }
  }
  const auto choice = g.straight_through(masked, tau, std::move(noise));
  const auto revealed = g.mul(choice, g.constant(batch.answers));
  const auto extended = g.add(g.constant(batch.history), revealed);
  const auto c_logits = numcore::mlp_forward(g, model.classifier, cn, extended);
  const auto loss = g.softmax_cross_entropy(c_logits, batch.labels);
  const double value = g.value(loss)[0];
  if (adam != nullptr) {
    const auto grads = g.backward(loss);
    auto q_grads = numcore::collect_gradients(grads, qn);
    auto c_grads = numcore::collect_gradients(grads, cn);
    q_grads.insert(q_grads.end(), std::make_move_iterator(c_grads.begin()),
                   std::make_move_iterator(c_grads.end()));
    auto params = model.querier.parameters();
    const auto c_params = model.classifier.parameters();
    params.insert(params.end(), c_params.begin(), c_params.end());
    numcore::adam_step(params, q_grads, *adam);
  }
  return value;
}

template <bool kMasked>
double objective(const PursuitModel& model, const PursuitData& data, double tau,
                 std::uint64_t seed) {
  if (data.size() == 0) {
    return 0.0;
  }
  Rng rng(seed);
  PursuitModel scratch = model;
  std::vector<std::size_t> avail;
  double total = 0.0;
  const std::size_t batch_size = std::max<std::size_t>(1, model.config.batch_size);
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t stop = std::min(data.size(), start + batch_size);
    Batch batch(stop - start, data.num_queries);
    for (std::size_t i = start; i < stop; ++i) {
      random_history_row<kMasked>(data, i, rng, batch, i - start, avail);
    }
    total += run_batch(scratch, batch, tau, rng, nullptr) * static_cast<double>(stop - start);
  }
  return total / static_cast<double>(data.size());
}

template <bool kMasked>
PursuitModel train_impl(const PursuitData& train, const PursuitData& val,
                        const TrainingConfig& config, Variant variant) {
  train.validate();
  if (val.size() > 0) {
    val.validate();
    if (val.num_queries != train.num_queries || val.num_classes != train.num_classes) {
      throw ConfigError("train_pursuit: train and validation shapes differ");
    }
  }
  config.validate();
  if (train.size() == 0) {
    throw ConfigError("train_pursuit: empty training set");
  }
  const std::size_t m_count = train.num_queries;

  PursuitModel model;
  model.num_queries = m_count;
  model.num_classes = train.num_classes;
  model.config = config;
  model.variant = variant;
  Rng init_rng = Rng::stream(config.seed, 11);
  model.querier = numcore::make_mlp(2 * m_count, config.hidden, m_count, init_rng);
  model.classifier = numcore::make_mlp(m_count, config.hidden, train.num_classes, init_rng);

  auto params = model.querier.parameters();
  const auto c_params = model.classifier.parameters();
  params.insert(params.end(), c_params.begin(), c_params.end());
  auto adam = numcore::AdamState::fresh({.lr = config.lr}, params);

  const numcore::TemperatureSchedule schedule(config.tau_start, config.tau_end, config.epochs);
  Rng rng = Rng::stream(config.seed, 12);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> avail;

  const std::size_t total_epochs = config.epochs + config.sequential_epochs;
  for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
    const bool sequential = epoch >= config.epochs;
    const double tau = sequential ? config.tau_end : schedule.at(epoch);
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      Batch batch(stop - start, m_count);
      for (std::size_t k = start; k < stop; ++k) {
        if (sequential) {
          rollout_history_row<kMasked>(model, train, order[k], rng, batch, k - start, avail);
        } else {
          random_history_row<kMasked>(train, order[k], rng, batch, k - start, avail);
        }
      }
      double loss = 0.0;
      try {
        loss = run_batch(model, batch, tau, rng, &adam);
      } catch (const NumericalError& e) {
        throw NumericalError("train_pursuit diverged at epoch " + std::to_string(epoch) +
                             ", batch starting at " + std::to_string(start) + ": " + e.what());
      }
      epoch_loss += loss * static_cast<double>(stop - start);
    }
    model.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  const double final_tau = total_epochs == 0 ? config.tau_start : config.tau_end;
  model.final_val_loss = objective<kMasked>(model, val.size() > 0 ? val : train, final_tau,
                                            config.seed ^ 0x5eedULL);
  return model;
}

}  // namespace

PursuitModel train_pursuit(const PursuitData& train, const PursuitData& val,
                           const TrainingConfig& config, Variant variant) {
  return train_impl<true>(train, val, config, variant);
}

PursuitModel train_pursuit_unmasked(const PursuitData& train, const PursuitData& val,
                                    const TrainingConfig& config) {
  return train_impl<false>(train, val, config, Variant::kVip);
}

double evaluate_objective(const PursuitModel& model, const PursuitData& data, double tau,
                          std::uint64_t seed) {
  model.validate();
  data.validate();
  return objective<true>(model, data, tau, seed);
}

FullConceptModel train_full_concept_baseline(const PursuitData& train, const PursuitData& val,
                                             const TrainingConfig& config) {
  train.validate();
  config.validate();
  (void)val;
  if (train.size() == 0) {
    throw ConfigError("train_full_concept_baseline: empty training set");
  }
  FullConceptModel model;
  model.num_queries = train.num_queries;
  model.num_classes = train.num_classes;
  model.config = config;
  Rng init_rng = Rng::stream(config.seed, 21);
  model.classifier = numcore::make_mlp(train.num_queries, config.hidden, train.num_classes, init_rng);
  auto params = model.classifier.parameters();
  auto adam = numcore::AdamState::fresh({.lr = config.lr}, params);
  Rng rng = Rng::stream(config.seed, 22);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      Tensor2 x(stop - start, train.num_queries);
      std::vector<std::size_t> labels;
      for (std::size_t k = start; k < stop; ++k) {
        const auto& a = train.answers[order[k]];
        for (std::size_t m = 0; m < a.size(); ++m) {
          x(k - start, m) = static_cast<double>(a[m]);
        }
        labels.push_back(train.labels[order[k]]);
      }
      numcore::Graph g;
      const auto nodes = numcore::bind(g, model.classifier);
      const auto logits = numcore::mlp_forward(g, model.classifier, nodes, g.constant(std::move(x)));
      const auto loss = g.softmax_cross_entropy(logits, std::move(labels));
      epoch_loss += g.value(loss)[0] * static_cast<double>(stop - start);
      numcore::adam_step(params, numcore::collect_gradients(g.backward(loss), nodes), adam);
    }
    model.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return model;
}

}  // namespace uavip::pursuit
