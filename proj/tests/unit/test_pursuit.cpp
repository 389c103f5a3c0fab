#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "uavip/data.hpp"
#include "uavip/error.hpp"
#include "uavip/pursuit.hpp"
#include "uavip/rng.hpp"

using namespace uavip;
using namespace uavip::pursuit;

namespace {

PursuitData from_dataset(const data::ConceptDataset& ds) {
  PursuitData d;
  d.num_queries = ds.num_queries();
  d.num_classes = ds.num_classes();
  for (const auto& s : ds.samples()) {
    d.answers.push_back(s.answers);
    d.labels.push_back(s.label);
  }
  return d;
}

data::JointSpec parity_spec(std::size_t m, double r) {
  data::JointSpec s;
  s.num_classes = 2;
  s.num_queries = m;
  s.prior = {0.5, 0.5};
  s.truth_table = {AnswerVector(m, 1), AnswerVector(m, -1)};
  s.reliability.assign(m, r);
  return s;
}

TrainingConfig small_config(std::size_t epochs) {
  TrainingConfig c;
  c.epochs = epochs;
  c.lr = 3e-3;
  c.batch_size = 16;
  c.hidden = {16, 16};
  c.seed = 7;
  return c;
}

bool same_mlp(const numcore::Mlp& a, const numcore::Mlp& b) {
  if (a.layers.size() != b.layers.size()) {
    return false;
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (!(a.layers[l].weights == b.layers[l].weights) || !(a.layers[l].bias == b.layers[l].bias)) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("history encoding") {
  History h(3);
  auto e = encode_input(h, {});
  CHECK(e.classifier == std::vector<double>{0, 0, 0});
  CHECK(e.querier == std::vector<double>{0, 0, 0, 1, 1, 1});
  e = encode_input(h, Mask{1, 1, 1});
  CHECK(e.querier == std::vector<double>{0, 0, 0, 0, 0, 0});
  h.record(2, 1);
  e = encode_input(h, Mask{1, 0, 0});
  CHECK(e.classifier == std::vector<double>{0, 0, 1});
  CHECK(e.querier == std::vector<double>{0, 0, 1, 0, 1, 0});
  CHECK(h.order() == std::vector<std::size_t>{2});
  CHECK_THROWS_AS(h.record(2, -1), ConfigError);
  CHECK_THROWS_AS(h.record(0, 0), ConfigError);
  CHECK_THROWS_AS(encode_input(h, Mask{0}), ConfigError);
  CHECK(variant_from_string("uav_mc") == Variant::kUavMc);
  CHECK_THROWS_AS(variant_from_string("ip"), ConfigError);
}

TEST_CASE("all-zero masks reproduce the unmasked objective bit for bit") {
  const auto ds = data::synth_generate(parity_spec(5, 0.85), 120, 1);
  const auto sp = data::split(ds, {0.6, 0.2, 0.2, 1});
  auto train = from_dataset(sp.train);
  const auto val = from_dataset(sp.val);
  const auto cfg = small_config(4);
  const auto reference = train_pursuit_unmasked(train, val, cfg);
  const auto empty_masks = train_pursuit(train, val, cfg);
  train.masks.assign(train.size(), Mask(5, 0));
  const auto zero_masks = train_pursuit(train, val, cfg);
  CHECK(same_mlp(reference.querier, zero_masks.querier));
  CHECK(same_mlp(reference.classifier, zero_masks.classifier));
  CHECK(same_mlp(reference.classifier, empty_masks.classifier));
  CHECK(reference.loss_curve == zero_masks.loss_curve);
  CHECK(reference.final_val_loss == zero_masks.final_val_loss);
}

TEST_CASE("training is seed-deterministic and reduces the objective") {
  const auto ds = data::synth_generate(parity_spec(6, 0.8), 200, 2);
  const auto sp = data::split(ds, {0.6, 0.2, 0.2, 2});
  auto train = from_dataset(sp.train);
  const auto val = from_dataset(sp.val);
  Rng rng(3);
  for (std::size_t i = 0; i < train.size(); ++i) {
    Mask m(6, 0);
    m[rng.uniform_index(6)] = 1;
    train.masks.push_back(m);
  }
  const auto a = train_pursuit(train, val, small_config(15), Variant::kUavOracle);
  const auto b = train_pursuit(train, val, small_config(15), Variant::kUavOracle);
  CHECK(a.final_val_loss == b.final_val_loss);
  CHECK(same_mlp(a.querier, b.querier));
  CHECK(a.loss_curve.size() == 15);
  CHECK(a.loss_curve.back() < a.loss_curve.front());
  CHECK(a.variant == Variant::kUavOracle);

  const auto untrained = train_pursuit(train, val, small_config(0));
  const auto again = train_pursuit(train, val, small_config(0));
  CHECK(untrained.loss_curve.empty());
  CHECK(same_mlp(untrained.classifier, again.classifier));
  CHECK(std::isfinite(untrained.final_val_loss));

  auto bad = small_config(1);
  bad.lr = -1.0;
  CHECK_THROWS_AS(train_pursuit(train, val, bad), ConfigError);
}

TEST_CASE("one noiseless query equal to the label is learned") {
  const auto ds = data::synth_generate(parity_spec(1, 1.0), 300, 4);
  const auto sp = data::split(ds, {0.6, 0.2, 0.2, 4});
  const auto model = train_pursuit(from_dataset(sp.train), from_dataset(sp.val), small_config(40));
  const auto val = from_dataset(sp.val);
  std::vector<std::string> ids(val.size(), "v");
  const auto result = batch_explain(model, ids, val.answers, {}, val.labels, {0.85, std::nullopt});
  CHECK(result.summary.accuracy >= 0.99);
  CHECK(result.summary.mean_queries == doctest::Approx(1.0));
}

TEST_CASE("inference edge cases and trace invariants") {
  const auto ds = data::synth_generate(parity_spec(6, 0.8), 100, 5);
  const auto sp = data::split(ds, {0.6, 0.2, 0.2, 5});
  const auto model = train_pursuit(from_dataset(sp.train), from_dataset(sp.val), small_config(3));
  const AnswerVector answers{1, -1, 1, 1, -1, 1};

  const auto full = infer(model, answers, {}, {1.0, std::nullopt});
  CHECK(full.steps.size() == 6);
  CHECK(full.termination == Termination::kExhausted);
  CHECK(infer(model, answers, {}, {1.0, 4}).steps.size() == 4);

  const auto none = infer(model, answers, Mask(6, 1), {0.85, std::nullopt});
  CHECK(none.steps.empty());
  CHECK(none.final_posterior() == posterior(model, History(6)));
  CHECK(none.masked.size() == 6);

  CHECK_THROWS_AS(infer(model, answers, {}, {0.5, std::nullopt}), ConfigError);
  CHECK_THROWS_AS(infer(model, answers, {}, {0.9, 7}), ConfigError);

  Rng rng(6);
  for (int t = 0; t < 300; ++t) {
    AnswerVector a(6);
    Mask mask(6, 0);
    std::size_t unmasked = 0;
    for (std::size_t m = 0; m < 6; ++m) {
      const auto r = rng.uniform_index(8);
      a[m] = r == 0 ? 0 : (r % 2 ? 1 : -1);
      mask[m] = rng.bernoulli(0.25) ? 1 : 0;
      unmasked += mask[m] == 0 ? 1 : 0;
    }
    const std::size_t budget = 1 + rng.uniform_index(6);
    const double theta = rng.uniform(0.55, 1.0);
    const auto tr = infer(model, a, mask, {theta, budget});
    CHECK(tr.steps.size() <= std::min(budget, unmasked));
    std::set<std::size_t> seen;
    for (const auto& step : tr.steps) {
      CHECK(seen.insert(step.query).second);
      CHECK(mask[step.query] == 0);
      CHECK(a[step.query] != 0);
      CHECK(step.answer == a[step.query]);
      double total = 0.0;
      for (double p : step.posterior) {
        CHECK(p >= 0.0);
        total += p;
      }
      CHECK(std::fabs(total - 1.0) < 1e-9);
    }
    for (std::size_t q : tr.masked) {
      CHECK(seen.count(q) == 0);
    }
    if (tr.termination == Termination::kConfidence) {
      CHECK(tr.confidence >= theta);
    }
    CHECK(tr.confidence == *std::max_element(tr.final_posterior().begin(),
                                             tr.final_posterior().end()));
    const auto repeat = infer(model, a, mask, {theta, budget});
    CHECK(repeat.steps.size() == tr.steps.size());
    CHECK(repeat.predicted == tr.predicted);
  }
}

TEST_CASE("batch summary") {
  const auto ds = data::synth_generate(parity_spec(4, 0.9), 80, 7);
  const auto sp = data::split(ds, {0.6, 0.2, 0.2, 7});
  const auto model = train_pursuit(from_dataset(sp.train), from_dataset(sp.val), small_config(5));
  const auto tr = infer(model, ds[0].answers, {}, {0.85, std::nullopt});
  const auto one = batch_explain(model, {ds[0].id}, {ds[0].answers}, {}, {ds[0].label},
                                 {0.85, std::nullopt});
  CHECK(one.summary.count == 1);
  CHECK(one.summary.mean_queries == static_cast<double>(tr.steps.size()));
  CHECK(one.summary.std_queries == 0.0);
  CHECK(one.summary.accuracy == (tr.predicted == ds[0].label ? 1.0 : 0.0));
  CHECK(one.traces[0].id == ds[0].id);
}

TEST_CASE("full-concept baseline") {
  const auto ds = data::synth_generate(parity_spec(4, 1.0), 200, 8);
  const auto sp = data::split(ds, {0.6, 0.2, 0.2, 8});
  const auto model =
      train_full_concept_baseline(from_dataset(sp.train), from_dataset(sp.val), small_config(40));
  std::size_t hits = 0;
  for (const auto& s : sp.test.samples()) {
    const auto p = full_concept_posterior(model, s.answers);
    hits += (p[1] > p[0] ? 1U : 0U) == s.label ? 1 : 0;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(sp.test.size()) >= 0.99);

  auto constant = from_dataset(sp.train);
  std::fill(constant.labels.begin(), constant.labels.end(), 1);
  auto constant_val = from_dataset(sp.val);
  std::fill(constant_val.labels.begin(), constant_val.labels.end(), 1);
  const auto flat = train_full_concept_baseline(constant, constant_val, small_config(20));
  for (const auto& s : sp.test.samples()) {
    const auto p = full_concept_posterior(flat, s.answers);
    CHECK(p[1] > p[0]);
  }
}
