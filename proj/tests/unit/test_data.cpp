#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "uavip/data.hpp"
#include "uavip/error.hpp"
#include "uavip/rng.hpp"

using namespace uavip;
using namespace uavip::data;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "uavip_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

JointSpec small_spec() {
  JointSpec s;
  s.num_classes = 2;
  s.num_queries = 3;
  s.prior = {0.5, 0.5};
  s.truth_table = {{1, -1, 1}, {-1, 1, 1}};
  s.reliability = {0.9, 0.8, 0.7};
  return s;
}

}  // namespace

TEST_CASE("csv: two rows load in file order") {
  const auto p = temp_file("two.csv");
  write(p, "id,label,c_1,c_2\na,0,1,-1\nb,1,-1,1\n");
  const auto ds = load_concept_csv(p);
  REQUIRE(ds.size() == 2);
  CHECK(ds.num_queries() == 2);
  CHECK(ds.num_classes() == 2);
  CHECK(ds[0].id == "a");
  CHECK(ds[1].answers == AnswerVector{-1, 1});
  CHECK_FALSE(ds.has_features());
}

TEST_CASE("csv: a 0 cell is rejected naming row and column") {
  const auto p = temp_file("zero.csv");
  write(p, "id,label,c_1,c_2\na,0,1,0\n");
  try {
    load_concept_csv(p);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.location() == 2);
    CHECK(std::string(e.what()).find("c_2") != std::string::npos);
  }
  write(p, "id,label,c_1\na,0,1\na,1,-1\n");
  CHECK_THROWS_AS(load_concept_csv(p), ParseError);
  write(p, "id,label,c_1,c_2\na,0,1\n");
  CHECK_THROWS_AS(load_concept_csv(p), ParseError);
}

TEST_CASE("csv: save then load a 100-sample synthetic dataset") {
  const auto ds = synth_generate(small_spec(), 100, 4);
  const auto p = temp_file("round.csv");
  save_concept_csv(ds, p);
  const auto back = load_concept_csv(p);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back[i].id == ds[i].id);
    CHECK(back[i].label == ds[i].label);
    CHECK(back[i].answers == ds[i].answers);
    CHECK(back[i].features == ds[i].features);
  }
}

TEST_CASE("synth: noiseless limit, frequency check, degenerate prior, reproducible") {
  auto spec = small_spec();
  spec.reliability = {1.0, 1.0, 1.0};
  const auto clean = synth_generate(spec, 200, 1);
  for (const auto& s : clean.samples()) {
    CHECK(s.answers == spec.truth_table[s.label]);
  }

  JointSpec one;
  one.num_classes = 2;
  one.num_queries = 1;
  one.prior = {0.5, 0.5};
  one.truth_table = {{1}, {-1}};
  one.reliability = {0.8};
  const auto big = synth_generate(one, 100000, 9);
  std::size_t agree = 0;
  for (const auto& s : big.samples()) {
    agree += s.answers[0] == one.truth_table[s.label][0] ? 1 : 0;
  }
  CHECK(static_cast<double>(agree) / 100000.0 == doctest::Approx(0.8).epsilon(0.0125));

  spec.prior = {1.0, 0.0};
  const auto skewed = synth_generate(spec, 50, 2);
  for (const auto& s : skewed.samples()) {
    CHECK(s.label == 0);
  }

  const auto a = synth_generate(small_spec(), 64, 77);
  const auto b = synth_generate(small_spec(), 64, 77);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].answers == b[i].answers);
    CHECK(a[i].features == b[i].features);
    CHECK(a[i].noise_sigma == b[i].noise_sigma);
  }

  auto invalid = small_spec();
  invalid.reliability[0] = 0.5;
  CHECK_THROWS_AS(synth_generate(invalid, 10, 0), ConfigError);
}

TEST_CASE("split: exact fractions, determinism, stratification, disjointness") {
  std::vector<Sample> samples;
  for (int i = 0; i < 8; ++i) {
    samples.push_back({"s" + std::to_string(i), {}, {1}, static_cast<std::size_t>(i % 2), {}});
  }
  const ConceptDataset ds(1, 2, samples);
  const auto sp = split(ds, {0.5, 0.25, 0.25, 3});
  CHECK(sp.train.size() == 4);
  CHECK(sp.val.size() == 2);
  CHECK(sp.test.size() == 2);

  const auto big = synth_generate(small_spec(), 301, 5);
  const auto s1 = split(big, {0.6, 0.2, 0.2, 11});
  const auto s2 = split(big, {0.6, 0.2, 0.2, 11});
  CHECK(s1.train_indices == s2.train_indices);
  CHECK(s1.test_indices == s2.test_indices);
  std::set<std::size_t> all;
  for (const auto* part : {&s1.train_indices, &s1.val_indices, &s1.test_indices}) {
    for (std::size_t i : *part) {
      CHECK(all.insert(i).second);
    }
  }
  CHECK(all.size() == big.size());

  std::vector<Sample> balanced;
  for (int i = 0; i < 100; ++i) {
    balanced.push_back({"b" + std::to_string(i), {}, {1}, static_cast<std::size_t>(i % 2), {}});
  }
  const auto sb = split(ConceptDataset(1, 2, balanced), {0.6, 0.2, 0.2, 1});
  CHECK(sb.stratified);
  for (const auto* part : {&sb.train, &sb.val, &sb.test}) {
    std::size_t ones = 0;
    for (const auto& s : part->samples()) {
      ones += s.label;
    }
    const auto zeros = part->size() - ones;
    CHECK(std::max(ones, zeros) - std::min(ones, zeros) <= 1);
  }

  std::vector<Sample> tiny{{"x", {}, {1}, 0, {}}, {"y", {}, {1}, 1, {}}};
  CHECK_THROWS_AS(split(ConceptDataset(1, 2, tiny), {0.6, 0.2, 0.2, 0}), ConfigError);
}

TEST_CASE("corruption: identity, full flip, exact distinct flips, log round-trip") {
  auto spec = small_spec();
  spec.num_queries = 7;
  spec.truth_table = {{1, 1, 1, 1, 1, 1, 1}, {-1, -1, -1, -1, -1, -1, -1}};
  spec.reliability.assign(7, 0.9);
  const auto ds = synth_generate(spec, 200, 3);

  const auto none = corrupt_answers(ds, 0, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(none.dataset[i].answers == ds[i].answers);
    CHECK(none.log.flipped[i].empty());
  }
  const auto all = corrupt_answers(ds, 7, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t m = 0; m < 7; ++m) {
      CHECK(all.dataset[i].answers[m] == -ds[i].answers[m]);
    }
  }
  const auto two = corrupt_answers(ds, 2, 8);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& f = two.log.flipped[i];
    REQUIRE(f.size() == 2);
    CHECK(f[0] < f[1]);
    std::size_t diff = 0;
    for (std::size_t m = 0; m < 7; ++m) {
      diff += two.dataset[i].answers[m] != ds[i].answers[m] ? 1 : 0;
    }
    CHECK(diff == 2);
  }
  CHECK_THROWS_AS(corrupt_answers(ds, 8, 0), ConfigError);

  const auto p = temp_file("log.csv");
  save_corruption_log(two.log, p);
  const auto back = load_corruption_log(p);
  CHECK(back.ids == two.log.ids);
  CHECK(back.flipped == two.log.flipped);
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a = Rng::stream(5, 1), b = Rng::stream(5, 1), c = Rng::stream(5, 2);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  Rng r(3);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(sum / 200000 == doctest::Approx(0.0).epsilon(0.01));
  CHECK(sq / 200000 == doctest::Approx(1.0).epsilon(0.01));
  double beta_sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    beta_sum += r.beta(38.0, 2.0);
  }
  CHECK(beta_sum / 100000 == doctest::Approx(0.95).epsilon(0.002));
  for (int i = 0; i < 1000; ++i) {
    CHECK(r.uniform_index(7) < 7);
  }
}
