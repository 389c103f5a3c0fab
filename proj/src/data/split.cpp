#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "uavip/data.hpp"
#include "uavip/error.hpp"
#include "uavip/rng.hpp"

namespace uavip::data {

void SplitSpec::validate() const {
  if (!(train > 0.0) || !(val > 0.0) || !(test > 0.0)) {
    throw ConfigError("split: fractions must be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }
}

namespace {

// Sizes for n items: val and test rounded, train takes the rest.
void allocate(std::size_t n, const SplitSpec& spec, std::size_t& n_train, std::size_t& n_val,
              std::size_t& n_test) {
  n_val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
  n_test = static_cast<std::size_t>(std::llround(spec.test * static_cast<double>(n)));
  if (n_val + n_test > n) {
    n_test = n - std::min(n, n_val);
  }
  n_train = n - n_val - n_test;
}

}  // namespace

Split split(const ConceptDataset& dataset, const SplitSpec& spec) {
  spec.validate();
  if (dataset.empty()) {
    throw ConfigError("split: dataset is empty");
  }
  Rng rng(spec.seed);
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[dataset[i].label].push_back(i);
  }
  bool stratify = true;
  for (const auto& [label, members] : by_class) {
    if (members.size() < 3) {
      stratify = false;
    }
  }

  Split out;
  out.stratified = stratify;
  auto deal = [&](std::vector<std::size_t> members) {
    rng.shuffle(members);
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::size_t n_test = 0;
    allocate(members.size(), spec, n_train, n_val, n_test);
    out.train_indices.insert(out.train_indices.end(), members.begin(),
                             members.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val_indices.insert(out.val_indices.end(),
                           members.begin() + static_cast<std::ptrdiff_t>(n_train),
                           members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test_indices.insert(out.test_indices.end(),
                            members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                            members.end());
  };
  if (stratify) {
    for (auto& [label, members] : by_class) {
      deal(members);
    }
  } else {
    std::vector<std::size_t> all(dataset.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      all[i] = i;
    }
    deal(std::move(all));
  }
  if (out.train_indices.empty() || out.val_indices.empty() || out.test_indices.empty()) {
    throw ConfigError("split: fractions leave an empty split for " +
                      std::to_string(dataset.size()) + " samples");
  }
  // Keep each split in original dataset order.
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.val_indices.begin(), out.val_indices.end());
  std::sort(out.test_indices.begin(), out.test_indices.end());
  out.train = dataset.subset(out.train_indices);
  out.val = dataset.subset(out.val_indices);
  out.test = dataset.subset(out.test_indices);
  return out;
}

}  // namespace uavip::data
