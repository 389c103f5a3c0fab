#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "uavip/data.hpp"
#include "uavip/pursuit.hpp"
#include "uavip/types.hpp"

namespace uavip::oracle {

inline constexpr std::size_t kMaxQueries = 20;
// MI values closer than this count as tied (lowest index wins).
inline constexpr double kMiTieTolerance = 1e-12;

// Explicit P(Y = k, Q = q) over all K * 2^M cells. Bit m of a cell index is
// set iff q_m = +1.
class JointTable {
 public:
  JointTable(std::size_t num_classes, std::size_t num_queries, std::vector<double> cells);

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t num_queries() const noexcept { return num_queries_; }
  std::size_t patterns() const noexcept { return std::size_t{1} << num_queries_; }
  double cell(std::size_t label, std::uint32_t pattern) const {
    return cells_[label * patterns() + pattern];
  }
  const std::vector<double>& cells() const noexcept { return cells_; }
  double total_mass() const;

 private:
  std::size_t num_classes_;
  std::size_t num_queries_;
  std::vector<double> cells_;
};

std::uint32_t pattern_of(const AnswerVector& answers);

JointTable build_joint(const data::JointSpec& spec);

struct Posterior {
  std::vector<double> probs;
  bool zero_evidence = false;  // history impossible under the joint; uniform fallback
};

// Bayes rule over cells consistent with `history` (0 = unasked).
Posterior posterior(const JointTable& joint, const AnswerVector& history);

// I(Q_m; Y | history) in bits for every m (asked queries get 0).
std::vector<double> conditional_mutual_information(const JointTable& joint,
                                                   const AnswerVector& history);

// Argmax of conditional mutual information over `available` (lowest index on
// ties); nullopt when nothing is available.
std::optional<std::size_t> greedy_ip_next(const JointTable& joint, const AnswerVector& history,
                                          const std::vector<std::size_t>& available);

// Omega_m = 1 iff predicted_m != truth_m.
Mask oracle_mask(const AnswerVector& predicted, const AnswerVector& truth);

// Greedy information pursuit with the same stopping rule as pursuit::infer.
pursuit::ExplanationTrace greedy_ip_rollout(const JointTable& joint, const AnswerVector& answers,
                                            const Mask& mask,
                                            const pursuit::InferenceConfig& config);

// Accuracy of the exact posterior classifier on full answers, averaged over the joint.
double bayes_accuracy(const JointTable& joint);

// Prediction of the exact posterior classifier on a full answer vector.
std::size_t bayes_predict(const JointTable& joint, const AnswerVector& answers);

}  // namespace uavip::oracle
