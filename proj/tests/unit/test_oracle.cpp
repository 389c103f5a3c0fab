#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../support/oracles.hpp"
#include "uavip/error.hpp"
#include "uavip/oracle.hpp"

using namespace uavip;
using namespace uavip::oracle;

namespace {

std::vector<std::size_t> unasked(const AnswerVector& h) {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < h.size(); ++m) {
    if (h[m] == 0) {
      out.push_back(m);
    }
  }
  return out;
}

double label_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    h -= v > 0.0 ? v * std::log2(v) : 0.0;
  }
  return h;
}

}  // namespace

TEST_CASE("joint table: deterministic cells, normalisation, size cap") {
  data::JointSpec s;
  s.num_classes = 2;
  s.num_queries = 1;
  s.prior = {0.5, 0.5};
  s.truth_table = {{1}, {-1}};
  s.reliability = {1.0};
  const auto j = build_joint(s);
  CHECK(j.cell(0, 1) == 0.5);
  CHECK(j.cell(1, 0) == 0.5);
  CHECK(j.cell(0, 0) == 0.0);
  CHECK(j.cell(1, 1) == 0.0);

  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto spec = oracles::random_joint(rng, 2 + rng.uniform_index(3), 1 + rng.uniform_index(8));
    const auto table = build_joint(spec);
    CHECK(std::fabs(table.total_mass() - 1.0) < 1e-12);
    for (double c : table.cells()) {
      CHECK(c >= 0.0);
    }
  }

  auto big = oracles::random_joint(rng, 2, 21);
  CHECK_THROWS_AS(build_joint(big), ConfigError);
  s.reliability = {0.5};
  CHECK_THROWS_AS(build_joint(s), ConfigError);
  CHECK(pattern_of(AnswerVector{1, -1, 1}) == 5U);
}

TEST_CASE("posterior matches brute-force cell summation") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto spec = oracles::random_joint(rng, 3, 3);
    const auto joint = build_joint(spec);
    AnswerVector h(3, 0);
    CHECK(posterior(joint, h).probs[0] == doctest::Approx(spec.prior[0]).epsilon(1e-12));
    h[rng.uniform_index(3)] = 1;
    for (std::size_t m = 0; m < 3; ++m) {
      if (h[m] == 0) {
        h[m] = -1;
        break;
      }
    }
    const auto p = posterior(joint, h);
    const auto ref = oracles::brute_posterior(spec, h);
    CHECK_FALSE(p.zero_evidence);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::fabs(p.probs[k] - ref[k]) < 1e-12);
    }
  }

  data::JointSpec det;
  det.num_classes = 3;
  det.num_queries = 1;
  det.prior = {0.2, 0.3, 0.5};
  det.truth_table = {{1}, {1}, {-1}};
  det.reliability = {1.0};
  const auto p = posterior(build_joint(det), AnswerVector{1});
  CHECK(p.probs[0] == doctest::Approx(0.4));
  CHECK(p.probs[1] == doctest::Approx(0.6));
  CHECK(p.probs[2] == 0.0);

  det.prior = {1.0, 0.0, 0.0};
  const auto z = posterior(build_joint(det), AnswerVector{-1});
  CHECK(z.zero_evidence);
  CHECK(z.probs[0] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("mutual information and greedy choice match full enumeration") {
  Rng rng(3);
  for (int t = 0; t < 60; ++t) {
    const auto spec = oracles::random_joint(rng, 3, 4);
    const auto joint = build_joint(spec);
    AnswerVector h(4, 0);
    const std::size_t steps = rng.uniform_index(3);
    for (std::size_t s = 0; s < steps; ++s) {
      const auto free = unasked(h);
      h[free[rng.uniform_index(free.size())]] = rng.bernoulli(0.5) ? 1 : -1;
    }
    const auto mi = conditional_mutual_information(joint, h);
    const double hy = label_entropy(posterior(joint, h).probs);
    for (std::size_t m = 0; m < 4; ++m) {
      if (h[m] != 0) {
        CHECK(mi[m] == 0.0);
        continue;
      }
      CHECK(std::fabs(mi[m] - oracles::brute_mi(spec, h, m)) < 1e-10);
      CHECK(mi[m] >= -1e-15);
      CHECK(mi[m] <= hy + 1e-12);
    }
    const auto free = unasked(h);
    CHECK(greedy_ip_next(joint, h, free) == oracles::brute_greedy(spec, h, free, kMiTieTolerance));
  }
}

TEST_CASE("greedy choice: dominance, ties, empty set, permutation equivariance") {
  data::JointSpec s;
  s.num_classes = 2;
  s.num_queries = 3;
  s.prior = {0.5, 0.5};
  // Query 2 carries the label; queries 0 and 1 agree across classes.
  s.truth_table = {{1, 1, 1}, {1, 1, -1}};
  s.reliability = {0.9, 0.8, 1.0};
  const auto joint = build_joint(s);
  CHECK(greedy_ip_next(joint, AnswerVector(3, 0), {0, 1, 2}) == 2U);
  CHECK(greedy_ip_next(joint, AnswerVector(3, 0), {1, 0}) == 0U);
  CHECK_FALSE(greedy_ip_next(joint, AnswerVector(3, 0), {}).has_value());

  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const auto spec = oracles::random_joint(rng, 3, 4);
    std::vector<std::size_t> perm{0, 1, 2, 3};
    rng.shuffle(perm);
    auto permuted = spec;
    for (std::size_t m = 0; m < 4; ++m) {
      permuted.reliability[perm[m]] = spec.reliability[m];
      for (std::size_t k = 0; k < 3; ++k) {
        permuted.truth_table[k][perm[m]] = spec.truth_table[k][m];
      }
    }
    const auto a = greedy_ip_next(build_joint(spec), AnswerVector(4, 0), {0, 1, 2, 3});
    const auto b = greedy_ip_next(build_joint(permuted), AnswerVector(4, 0), {0, 1, 2, 3});
    const auto mi = conditional_mutual_information(build_joint(spec), AnswerVector(4, 0));
    const auto mi_p = conditional_mutual_information(build_joint(permuted), AnswerVector(4, 0));
    CHECK(std::fabs(mi[*a] - mi_p[*b]) < 1e-12);
    for (std::size_t m = 0; m < 4; ++m) {
      CHECK(std::fabs(mi[m] - mi_p[perm[m]]) < 1e-12);
    }
  }
}

TEST_CASE("oracle mask") {
  CHECK(oracle_mask({1, -1, 1, 1}, {1, -1, 1, 1}) == Mask{0, 0, 0, 0});
  CHECK(oracle_mask({1, -1, 1, -1}, {1, -1, 1, 1}) == Mask{0, 0, 0, 1});
  CHECK(oracle_mask({-1, 1}, {1, -1}) == Mask{1, 1});
  CHECK_THROWS_AS(oracle_mask({1}, {1, 1}), ConfigError);

  data::JointSpec s;
  s.num_classes = 2;
  s.num_queries = 6;
  s.prior = {0.5, 0.5};
  s.truth_table = {AnswerVector(6, 1), AnswerVector(6, -1)};
  s.reliability.assign(6, 0.9);
  const auto ds = data::synth_generate(s, 50, 1);
  const auto corrupted = data::corrupt_answers(ds, 2, 5);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto mask = oracle_mask(corrupted.dataset[i].answers, ds[i].answers);
    Mask expected(6, 0);
    for (std::size_t m : corrupted.log.flipped[i]) {
      expected[m] = 1;
    }
    CHECK(mask == expected);
  }
}

TEST_CASE("greedy rollout and Bayes accuracy") {
  Rng rng(5);
  const auto spec = oracles::random_joint(rng, 3, 5);
  const auto joint = build_joint(spec);
  const AnswerVector answers{1, -1, 1, 1, -1};
  const auto all = greedy_ip_rollout(joint, answers, Mask(5, 0), {1.0, std::nullopt});
  CHECK(all.steps.size() == 5);
  const auto masked = greedy_ip_rollout(joint, answers, Mask{1, 0, 1, 0, 0}, {1.0, std::nullopt});
  CHECK(masked.steps.size() == 3);
  for (const auto& step : masked.steps) {
    CHECK(step.query != 0);
    CHECK(step.query != 2);
  }
  CHECK(all.predicted == bayes_predict(joint, answers));

  data::JointSpec one;
  one.num_classes = 2;
  one.num_queries = 3;
  one.prior = {0.5, 0.5};
  one.truth_table = {{1, 1, 1}, {-1, 1, 1}};
  one.reliability = {1.0, 0.7, 0.6};
  const auto det = greedy_ip_rollout(build_joint(one), {-1, 1, -1}, Mask(3, 0), {0.99, std::nullopt});
  REQUIRE(det.steps.size() == 1);
  CHECK(det.steps[0].query == 0);
  CHECK(det.predicted == 1);
  CHECK(det.termination == pursuit::Termination::kConfidence);

  // Bayes accuracy by summing the max cell over each pattern.
  double expected = 0.0;
  for (std::uint32_t q = 0; q < joint.patterns(); ++q) {
    double best = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      best = std::max(best, joint.cell(k, q));
    }
    expected += best;
  }
  CHECK(bayes_accuracy(joint) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(bayes_accuracy(build_joint(one)) == doctest::Approx(1.0));
}
