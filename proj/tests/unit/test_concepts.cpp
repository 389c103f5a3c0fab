#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "uavip/concepts.hpp"
#include "uavip/error.hpp"
#include "uavip/rng.hpp"

using namespace uavip;
using namespace uavip::concepts;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "uavip_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

data::JointSpec spec(std::size_t m, double r) {
  data::JointSpec s;
  s.num_classes = 2;
  s.num_queries = m;
  s.prior = {0.5, 0.5};
  s.truth_table = {AnswerVector(m, 1), AnswerVector(m, -1)};
  for (std::size_t j = 0; j < m; j += 2) {
    s.truth_table[0][j] = -1;
    s.truth_table[1][j] = 1;
  }
  s.reliability.assign(m, r);
  return s;
}

}  // namespace

TEST_CASE("logistic saturation and symmetry") {
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(40.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(1.0 - logistic(40.0) < 1e-9);
  CHECK(logistic(-3.0) == doctest::Approx(1.0 - logistic(3.0)));
}

TEST_CASE("hand-set one-layer concept model matches closed-form logistic") {
  ConceptModelParams model;
  model.mlp.layers.push_back({numcore::Tensor2(2, 2, {0.5, -1.0, 2.0, 0.25}),
                              numcore::Tensor2::row_vector({0.1, -0.2})});
  std::vector<data::Sample> samples{{"x", {1.0, -0.5}, {1, -1}, 0, {}}};
  const data::ConceptDataset ds(2, 2, samples);
  const auto d = predict_distributions(model, ds);
  CHECK(d.probs[0][0] == doctest::Approx(1.0 / (1.0 + std::exp(-(0.5 - 1.0 + 0.1)))));
  CHECK(d.probs[0][1] == doctest::Approx(1.0 / (1.0 + std::exp(-(-1.0 - 0.125 - 0.2)))));
}

TEST_CASE("concept model: separable concepts learned, deterministic, featureless rejected") {
  auto s = spec(3, 1.0);
  s.noise = {0.0, 0.0, 0.0};
  const auto ds = data::synth_generate(s, 300, 1);
  ConceptModelConfig cfg;
  cfg.epochs = 60;
  cfg.hidden = {16};
  cfg.seed = 4;
  const auto m1 = train_concept_model(ds, cfg);
  const auto m2 = train_concept_model(ds, cfg);
  CHECK(m1.loss_curve.back() == m2.loss_curve.back());
  CHECK(m1.loss_curve.back() < m1.loss_curve.front());
  const auto held = data::synth_generate(s, 200, 2);
  const auto predicted = predict_distributions(m1, held).predicted_answers();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    for (std::size_t m = 0; m < 3; ++m) {
      hits += predicted[i][m] == held[i].answers[m] ? 1 : 0;
    }
  }
  CHECK(static_cast<double>(hits) / 600.0 >= 0.99);

  std::vector<data::Sample> bare{{"a", {}, {1, 1, 1}, 0, {}}};
  CHECK_THROWS_AS(train_concept_model(data::ConceptDataset(3, 2, bare), cfg), ConfigError);
}

TEST_CASE("MC dropout: stochastic, reproducible, mean matches exhaustive mask enumeration") {
  // One hidden layer of width 4 with dropout 0.5: 16 equally likely masks.
  ConceptModelParams model;
  model.dropout_rate = 0.5;
  model.mlp.layers.push_back({numcore::Tensor2(2, 4, {0.9, -0.4, 0.3, 1.1, 0.2, 0.8, -0.7, 0.5}),
                              numcore::Tensor2::row_vector({0.1, 0.2, 0.3, -0.1})});
  model.mlp.layers.push_back({numcore::Tensor2(4, 1, {1.2, -0.8, 0.6, 0.9}),
                              numcore::Tensor2::row_vector({-0.3})});
  std::vector<data::Sample> samples{{"x", {1.0, 0.5}, {1}, 0, {}}};
  const data::ConceptDataset ds(1, 2, samples);

  const std::vector<double> x{1.0, 0.5};
  double expected = 0.0;
  for (unsigned mask = 0; mask < 16; ++mask) {
    double logit = -0.3;
    for (std::size_t h = 0; h < 4; ++h) {
      if (!((mask >> h) & 1U)) {
        continue;
      }
      double pre = model.mlp.layers[0].bias(0, h);
      for (std::size_t i = 0; i < 2; ++i) {
        pre += x[i] * model.mlp.layers[0].weights(i, h);
      }
      logit += std::max(0.0, pre) * 2.0 * model.mlp.layers[1].weights(h, 0);
    }
    expected += logistic(logit) / 16.0;
  }
  const auto mc = mc_sample_distributions(model, ds, 1000, 3);
  double mean = 0.0, sq = 0.0;
  for (std::size_t s = 0; s < 1000; ++s) {
    mean += mc.samples[0](s, 0) / 1000.0;
  }
  for (std::size_t s = 0; s < 1000; ++s) {
    sq += std::pow(mc.samples[0](s, 0) - mean, 2);
  }
  CHECK(std::fabs(mean - expected) < 0.02);
  CHECK(sq > 0.0);
  const auto again = mc_sample_distributions(model, ds, 1000, 3);
  CHECK(again.samples[0] == mc.samples[0]);

  model.dropout_rate = 0.0;
  CHECK_THROWS_AS(mc_sample_distributions(model, ds, 10, 3), ConfigError);
}

TEST_CASE("simulator: perfect, degenerate, frequency, log consistency, dispersion") {
  const auto ds = data::synth_generate(spec(10, 0.9), 1000, 1);
  SimulatorConfig perfect;
  perfect.accuracy = 1.0;
  perfect.ambiguity = 0.0;
  const auto p = simulate_answers(ds, perfect);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t m = 0; m < 10; ++m) {
      CHECK(p.correct[i][m]);
      CHECK_FALSE(p.ambiguous[i][m]);
    }
  }

  SimulatorConfig all;
  all.ambiguity = 1.0;
  const auto a = simulate_answers(ds, all);
  for (const auto& row : a.distributions.probs) {
    for (double v : row) {
      CHECK(v >= 0.35);
      CHECK(v <= 0.65);
    }
  }

  const auto big = data::synth_generate(spec(10, 0.9), 10000, 2);
  SimulatorConfig freq;
  freq.accuracy = 0.9;
  freq.ambiguity = 0.0;
  const auto f = simulate_answers(big, freq);
  std::size_t right = 0;
  for (const auto& row : f.correct) {
    for (bool c : row) {
      right += c ? 1 : 0;
    }
  }
  CHECK(static_cast<double>(right) / 100000.0 == doctest::Approx(0.9).epsilon(0.011));

  SimulatorConfig mixed;
  const auto s = simulate_answers(ds, mixed);
  const auto recomputed = answer_correctness(s.distributions, ds.answers());
  CHECK(recomputed == s.correct);
  double amb = 0.0, conf = 0.0;
  std::size_t n_amb = 0, n_conf = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t m = 0; m < 10; ++m) {
      double mu = 0.0, var = 0.0;
      const auto& t = s.mc.samples[i];
      for (std::size_t r = 0; r < t.rows(); ++r) {
        mu += t(r, m) / static_cast<double>(t.rows());
      }
      for (std::size_t r = 0; r < t.rows(); ++r) {
        var += std::pow(t(r, m) - mu, 2) / static_cast<double>(t.rows());
      }
      if (s.ambiguous[i][m]) {
        amb += std::sqrt(var);
        ++n_amb;
      } else {
        conf += std::sqrt(var);
        ++n_conf;
      }
    }
  }
  CHECK(amb / static_cast<double>(n_amb) > conf / static_cast<double>(n_conf));

  SimulatorConfig bad;
  bad.accuracy = 0.4;
  CHECK_THROWS_AS(simulate_answers(ds, bad), ConfigError);
}

TEST_CASE("probability file: bit-exact round-trip, optional MC, validation") {
  const auto ds = data::synth_generate(spec(4, 0.9), 20, 5);
  const auto sim = simulate_answers(ds, {});
  const auto path = temp_file("probs.csv");
  export_probabilities({sim.distributions, sim.mc}, path);
  const auto back = import_probabilities(path);
  CHECK(back.distributions.ids == sim.distributions.ids);
  CHECK(back.distributions.probs == sim.distributions.probs);
  REQUIRE(back.mc.has_value());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.mc->samples[i] == sim.mc.samples[i]);
  }

  export_probabilities({sim.distributions, std::nullopt}, path);
  CHECK_FALSE(import_probabilities(path).mc.has_value());

  std::ofstream(path) << "id,2,0\na,0.5,1.5\n";
  try {
    import_probabilities(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.location() == 2);
  }
  std::ofstream(path) << "id,2,0\na,0.5\n";
  CHECK_THROWS_AS(import_probabilities(path), ParseError);
}
