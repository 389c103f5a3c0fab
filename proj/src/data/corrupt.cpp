#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "text_io.hpp"
#include "uavip/data.hpp"
#include "uavip/error.hpp"
#include "uavip/rng.hpp"

namespace uavip::data {

std::vector<std::vector<std::size_t>> corrupt_in_place(std::vector<AnswerVector>& answers,
                                                       const std::vector<std::string>& ids,
                                                       std::size_t flips_per_sample,
                                                       std::uint64_t seed) {
  if (answers.size() != ids.size()) {
    throw ConfigError("corrupt_answers: id count does not match answer count");
  }
  std::vector<std::vector<std::size_t>> log(answers.size());
  for (std::size_t i = 0; i < answers.size(); ++i) {
    AnswerVector& a = answers[i];
    if (flips_per_sample > a.size()) {
      throw ConfigError("corrupt_answers: j = " + std::to_string(flips_per_sample) +
                        " exceeds M = " + std::to_string(a.size()));
    }
    if (flips_per_sample == 0) {
      continue;
    }
    Rng rng = Rng::stream(seed, id_hash(ids[i]));
    std::vector<std::size_t> order(a.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < flips_per_sample; ++k) {
      std::swap(order[k], order[k + rng.uniform_index(order.size() - k)]);
    }
    std::vector<std::size_t> flipped(order.begin(),
                                     order.begin() + static_cast<std::ptrdiff_t>(flips_per_sample));
    std::sort(flipped.begin(), flipped.end());
    for (std::size_t m : flipped) {
      a[m] = static_cast<Answer>(-a[m]);
    }
    log[i] = std::move(flipped);
  }
  return log;
}

Corrupted corrupt_answers(const ConceptDataset& dataset, std::size_t flips_per_sample,
                          std::uint64_t seed) {
  if (flips_per_sample > dataset.num_queries()) {
    throw ConfigError("corrupt_answers: j = " + std::to_string(flips_per_sample) +
                      " exceeds M = " + std::to_string(dataset.num_queries()));
  }
  auto answers = dataset.answers();
  std::vector<std::string> ids;
  for (const Sample& s : dataset.samples()) {
    ids.push_back(s.id);
  }
  Corrupted out;
  out.log.flipped = corrupt_in_place(answers, ids, flips_per_sample, seed);
  out.log.ids = std::move(ids);
  out.dataset = dataset.with_answers(answers);
  return out;
}

void save_corruption_log(const CorruptionLog& log, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "id,flipped_indices\n";
  for (std::size_t i = 0; i < log.ids.size(); ++i) {
    out << log.ids[i] << ',';
    for (std::size_t k = 0; k < log.flipped[i].size(); ++k) {
      out << (k ? ";" : "") << log.flipped[i][k];
    }
    out << '\n';
  }
  detail::write_text(path, out.str());
}

CorruptionLog load_corruption_log(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || lines[0] != "id,flipped_indices") {
    throw ParseError(path.string() + ":1: expected header id,flipped_indices", 1);
  }
  CorruptionLog log;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) {
      continue;
    }
    const auto fields = detail::split_fields(lines[li]);
    if (fields.size() != 2) {
      throw ParseError(path.string() + ":" + std::to_string(li + 1) + ": expected 2 fields",
                       li + 1);
    }
    std::vector<std::size_t> flipped;
    if (!fields[1].empty()) {
      for (const auto& cell : detail::split_fields(fields[1], ';')) {
        try {
          flipped.push_back(detail::parse_index(cell));
        } catch (const std::invalid_argument&) {
          throw ParseError(path.string() + ":" + std::to_string(li + 1) + ": bad index '" + cell +
                               "'",
                           li + 1);
        }
      }
    }
    log.ids.push_back(fields[0]);
    log.flipped.push_back(std::move(flipped));
  }
  return log;
}

}  // namespace uavip::data
