#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace uavip {

// std::mt19937_64 with hand-written distributions; sequences are identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (seed, stream).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double open_uniform();  // (0, 1)
  std::size_t uniform_index(std::size_t n);  // [0, n)
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  double gamma(double shape);
  double beta(double a, double b);
  double gumbel();
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t categorical(std::span<const double> probs);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace uavip
