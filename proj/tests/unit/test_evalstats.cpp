#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../support/oracles.hpp"
#include "uavip/error.hpp"
#include "uavip/evalstats.hpp"

using namespace uavip;
using namespace uavip::evalstats;

TEST_CASE("auc examples and error") {
  CHECK(auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75));
  CHECK(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(auc({0.3, 0.3, 0.3, 0.3}, {0, 1, 0, 1}) == 0.5);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), std::domain_error);
}

TEST_CASE("auc properties against pair counting") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.uniform_index(40);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.uniform_index(6));
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    const double a = auc(s, y);
    CHECK(std::fabs(a - oracles::pair_auc(s, y)) < 1e-12);
    std::vector<double> neg(n), mono(n);
    for (std::size_t i = 0; i < n; ++i) {
      neg[i] = -s[i];
      mono[i] = std::exp(0.7 * s[i]) - 3.0;
    }
    CHECK(std::fabs(a + auc(neg, y) - 1.0) < 1e-12);
    CHECK(std::fabs(a - auc(mono, y)) < 1e-12);
  }
}

TEST_CASE("multiclass auc") {
  const std::vector<std::vector<double>> post{{0.8, 0.2}, {0.3, 0.7}, {0.6, 0.4}, {0.45, 0.55}};
  const std::vector<std::size_t> labels{0, 1, 1, 0};
  CHECK(multiclass_auc(post, labels).value ==
        doctest::Approx(auc({0.2, 0.7, 0.4, 0.55}, {0, 1, 1, 0})));

  Rng rng(2);
  std::vector<std::vector<double>> p3;
  std::vector<std::size_t> y3;
  for (int i = 0; i < 30; ++i) {
    std::vector<double> row{rng.uniform(), rng.uniform(), rng.uniform()};
    const double z = row[0] + row[1] + row[2];
    for (double& v : row) {
      v /= z;
    }
    p3.push_back(row);
    y3.push_back(i % 3);
  }
  double expected = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < p3.size(); ++i) {
      s.push_back(p3[i][k]);
      y.push_back(y3[i] == k ? 1 : 0);
    }
    expected += oracles::pair_auc(s, y) / 3.0;
  }
  CHECK(multiclass_auc(p3, y3).value == doctest::Approx(expected).epsilon(1e-12));

  const std::vector<std::vector<double>> perfect{{1, 0, 0}, {0, 1, 0}, {1, 0, 0}};
  const auto m = multiclass_auc(perfect, {0, 1, 0});
  CHECK(m.value == 1.0);
  CHECK(m.excluded_classes == std::vector<std::size_t>{2});
}

TEST_CASE("accuracy and macro F1") {
  CHECK(accuracy({0, 1, 1}, {0, 1, 1}) == 1.0);
  CHECK(macro_f1({0, 1, 1}, {0, 1, 1}, 2) == 1.0);
  CHECK(accuracy({1, 1, 1, 1}, {1, 1, 0, 0}) == 0.5);
  CHECK(macro_f1({1, 1, 1, 1}, {1, 1, 0, 0}, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(macro_f1({0, 0}, {0, 0}, 3) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(macro_f1({3}, {0}, 2), ConfigError);
}

TEST_CASE("Wilcoxon signed-rank") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  auto r = wilcoxon_signed_rank(a, a);
  CHECK(r.p_value == 1.0);
  CHECK(r.warning.has_value());

  std::vector<double> x(10), y(10);
  for (int i = 0; i < 10; ++i) {
    x[i] = 10.0 + i * 0.37 + 1.0;
    y[i] = 10.0 + i * 0.37 - 0.1 * i;
  }
  r = wilcoxon_signed_rank(x, y);
  CHECK(r.exact);
  CHECK(r.p_value == doctest::Approx(2.0 / 1024.0).epsilon(1e-12));
  CHECK(r.statistic == 55.0);

  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 5 + rng.uniform_index(8);
    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = static_cast<double>(rng.uniform_index(7));
      v[i] = static_cast<double>(rng.uniform_index(7));
    }
    const auto w = wilcoxon_signed_rank(u, v);
    CHECK(std::fabs(w.p_value - oracles::wilcoxon_dp(u, v)) < 1e-12);
    CHECK(w.p_value > 0.0);
    CHECK(w.p_value <= 1.0);
    CHECK(std::fabs(w.p_value - wilcoxon_signed_rank(v, u).p_value) < 1e-12);
  }

  std::vector<double> big_a(30), big_b(30);
  for (std::size_t i = 0; i < 30; ++i) {
    big_a[i] = rng.normal() + 0.5;
    big_b[i] = rng.normal();
  }
  const auto approx = wilcoxon_signed_rank(big_a, big_b);
  CHECK_FALSE(approx.exact);
  CHECK(approx.p_value > 0.0);
  CHECK(approx.p_value <= 1.0);
}

TEST_CASE("accuracy by error count") {
  // counts 0,0,1,1,2,5 with correctness 1,0,1,1,0,1
  const auto g = accuracy_by_error_count({true, false, true, true, false, true}, {0, 0, 1, 1, 2, 5});
  REQUIRE(g.size() == 3);
  CHECK(g[0].name == "0");
  CHECK(g[0].n == 2);
  CHECK(*g[0].accuracy == doctest::Approx(0.5));
  CHECK(g[1].n == 2);
  CHECK(*g[1].accuracy == 1.0);
  CHECK(g[2].name == ">=2");
  CHECK(*g[2].accuracy == doctest::Approx(0.5));

  const auto zero = accuracy_by_error_count({true, false, true}, {0, 0, 0});
  CHECK(*zero[0].accuracy == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(zero[1].accuracy.has_value());
  CHECK(zero[0].n + zero[1].n + zero[2].n == 3);
  CHECK(error_groups_csv(zero).find("1,0,") != std::string::npos);
}

TEST_CASE("correctness detection auc") {
  CHECK(correctness_detection_auc({0.9, 0.1, 0.8, 0.2}, {false, true, false, true}) == 1.0);
  Rng rng(4);
  std::vector<double> u(20000);
  std::vector<bool> ok(20000);
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = rng.uniform();
    ok[i] = rng.bernoulli(0.7);
  }
  CHECK(std::fabs(correctness_detection_auc(u, ok) - 0.5) < 0.02);
  CHECK_THROWS_AS(correctness_detection_auc({0.1, 0.2}, {true, true}), std::domain_error);
}

TEST_CASE("aggregate runs") {
  std::vector<RunMetrics> vip, mc;
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    vip.push_back({70.0 + rng.uniform(0, 5), 80.0, 75.0, 6.0});
    mc.push_back({80.0 + rng.uniform(0, 5), 85.0, 78.0, 4.0});
  }
  const auto rep = aggregate_runs({{"vip", vip}, {"uav_mc", mc}});
  REQUIRE(rep.methods.size() == 2);
  double mean = 0.0;
  for (const auto& r : vip) {
    mean += r.accuracy / 10.0;
  }
  double var = 0.0;
  for (const auto& r : vip) {
    var += (r.accuracy - mean) * (r.accuracy - mean) / 9.0;
  }
  CHECK(rep.methods[0].accuracy.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(*rep.methods[0].accuracy.std == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  CHECK(*rep.methods[1].auc.std == 0.0);
  CHECK(*rep.methods[0].p_value == doctest::Approx(2.0 / 1024.0));
  CHECK(report_text(rep).find("uav_mc") != std::string::npos);
  CHECK(report_csv(rep).find("vip") != std::string::npos);

  const auto single = aggregate_runs({{"vip", {vip[0]}}, {"uav_mc", {mc[0]}}});
  CHECK_FALSE(single.methods[0].accuracy.std.has_value());
  CHECK_THROWS_AS(aggregate_runs({{"vip", vip}, {"uav_mc", {mc[0]}}}), ConfigError);
}
