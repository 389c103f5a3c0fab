#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "uavip/concepts.hpp"
#include "uavip/error.hpp"
#include "uavip/numcore/adam.hpp"
#include "uavip/rng.hpp"

namespace uavip::concepts {

double logistic(double logit) {
  if (logit >= 0.0) {
    return 1.0 / (1.0 + std::exp(-logit));
  }
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

void AnswerDistributionSet::validate() const {
  if (ids.size() != probs.size()) {
    throw ConfigError("answer distributions: id count does not match row count");
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].size() != num_queries) {
      throw ConfigError("answer distributions: sample '" + ids[i] + "' has the wrong width");
    }
    for (double p : probs[i]) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError("answer distributions: sample '" + ids[i] +
                          "' has a probability outside [0,1]");
      }
    }
  }
}

std::vector<AnswerVector> AnswerDistributionSet::predicted_answers() const {
  std::vector<AnswerVector> out;
  out.reserve(probs.size());
  for (const auto& row : probs) {
    AnswerVector a(row.size());
    for (std::size_t m = 0; m < row.size(); ++m) {
      a[m] = answer_from_probability(row[m]);
    }
    out.push_back(std::move(a));
  }
  return out;
}

void MCSampleSet::validate() const {
  if (num_passes < 2) {
    throw ConfigError("MC samples: at least 2 passes required");
  }
  if (ids.size() != samples.size()) {
    throw ConfigError("MC samples: id count does not match sample count");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].rows() != num_passes || samples[i].cols() != num_queries) {
      throw ConfigError("MC samples: sample '" + ids[i] + "' has the wrong shape");
    }
    for (double p : samples[i].data()) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError("MC samples: sample '" + ids[i] + "' has a probability outside [0,1]");
      }
    }
  }
}

namespace {

numcore::Tensor2 feature_matrix(const data::ConceptDataset& ds,
                                const std::vector<std::size_t>& rows) {
  numcore::Tensor2 x(rows.size(), ds.feature_width());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = ds[rows[r]].features;
    std::copy(f.begin(), f.end(), x.row(r).begin());
  }
  return x;
}

void require_features(const ConceptModelParams& model, const data::ConceptDataset& ds) {
  if (!ds.has_features()) {
    throw ConfigError("concept model: dataset has no feature columns");
  }
  if (ds.feature_width() != model.mlp.input_width()) {
    throw ConfigError("concept model: dataset has " + std::to_string(ds.feature_width()) +
                      " features, model expects " + std::to_string(model.mlp.input_width()));
  }
  if (ds.num_queries() != model.mlp.output_width()) {
    throw ConfigError("concept model: dataset has " + std::to_string(ds.num_queries()) +
                      " concepts, model predicts " + std::to_string(model.mlp.output_width()));
  }
}

}  // namespace

ConceptModelParams train_concept_model(const data::ConceptDataset& train,
                                       const ConceptModelConfig& config) {
  if (!train.has_features()) {
    throw ConfigError(
        "train_concept_model: dataset has no feature columns; use the answer simulator or "
        "import externally computed probabilities instead");
  }
  if (train.empty()) {
    throw ConfigError("train_concept_model: empty training set");
  }
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) {
    throw ConfigError("train_concept_model: dropout must be in [0, 1)");
  }
  if (config.batch_size == 0) {
    throw ConfigError("train_concept_model: batch size must be positive");
  }
  Rng init_rng = Rng::stream(config.seed, 1);
  ConceptModelParams model;
  model.mlp = numcore::make_mlp(train.feature_width(), config.hidden, train.num_queries(), init_rng);
  model.dropout_rate = config.dropout;
  model.seed = config.seed;
  model.epochs = config.epochs;

  auto params = model.mlp.parameters();
  auto adam = numcore::AdamState::fresh({.lr = config.lr}, params);
  Rng rng = Rng::stream(config.seed, 2);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(stop));
      numcore::Tensor2 targets(rows.size(), train.num_queries());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& a = train[rows[r]].answers;
        for (std::size_t m = 0; m < a.size(); ++m) {
          targets(r, m) = a[m] > 0 ? 1.0 : 0.0;
        }
      }
      numcore::Graph graph;
      const auto nodes = numcore::bind(graph, model.mlp);
      const auto input = graph.constant(feature_matrix(train, rows));
      const auto logits = numcore::mlp_forward(graph, model.mlp, nodes, input,
                                               {.rate = config.dropout, .rng = &rng});
      const auto loss = graph.sigmoid_bce(logits, std::move(targets));
      epoch_loss += graph.value(loss)[0] * static_cast<double>(rows.size());
      const auto grads = numcore::collect_gradients(graph.backward(loss), nodes);
      numcore::adam_step(params, grads, adam);
    }
    model.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return model;
}

AnswerDistributionSet predict_distributions(const ConceptModelParams& model,
                                            const data::ConceptDataset& samples) {
  require_features(model, samples);
  std::vector<std::size_t> rows(samples.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const numcore::Tensor2 logits = numcore::mlp_forward(model.mlp, feature_matrix(samples, rows));
  AnswerDistributionSet out;
  out.num_queries = samples.num_queries();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.ids.push_back(samples[i].id);
    std::vector<double> p(out.num_queries);
    for (std::size_t m = 0; m < p.size(); ++m) {
      p[m] = logistic(logits(i, m));
    }
    out.probs.push_back(std::move(p));
  }
  return out;
}

MCSampleSet mc_sample_distributions(const ConceptModelParams& model,
                                    const data::ConceptDataset& samples, std::size_t passes,
                                    std::uint64_t seed) {
  if (passes < 2) {
    throw ConfigError("mc_sample_distributions: at least 2 passes required");
  }
  if (!(model.dropout_rate > 0.0)) {
    throw ConfigError(
        "mc_sample_distributions: model was trained without dropout, so MC passes carry no "
        "stochasticity; use the answer simulator for MC uncertainty instead");
  }
  require_features(model, samples);
  MCSampleSet out;
  out.num_queries = samples.num_queries();
  out.num_passes = passes;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    Rng rng = Rng::stream(seed, data::id_hash(s.id));
    numcore::Tensor2 input(passes, s.features.size());
    for (std::size_t r = 0; r < passes; ++r) {
      std::copy(s.features.begin(), s.features.end(), input.row(r).begin());
    }
    numcore::Tensor2 probs =
        numcore::mlp_forward_dropout(model.mlp, input, model.dropout_rate, rng);
    for (double& v : probs.data()) {
      v = logistic(v);
    }
    out.ids.push_back(s.id);
    out.samples.push_back(std::move(probs));
  }
  return out;
}

std::vector<std::vector<bool>> answer_correctness(const AnswerDistributionSet& dists,
                                                  const std::vector<AnswerVector>& truth) {
  if (truth.size() != dists.size()) {
    throw ConfigError("answer_correctness: sample count mismatch");
  }
  std::vector<std::vector<bool>> out(dists.size());
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (truth[i].size() != dists.probs[i].size()) {
      throw ConfigError("answer_correctness: query count mismatch");
    }
    out[i].resize(truth[i].size());
    for (std::size_t m = 0; m < truth[i].size(); ++m) {
      out[i][m] = answer_from_probability(dists.probs[i][m]) == truth[i][m];
    }
  }
  return out;
}

}  // namespace uavip::concepts
