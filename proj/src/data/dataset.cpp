#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "text_io.hpp"
#include "uavip/data.hpp"
#include "uavip/error.hpp"

namespace uavip::data {

ConceptDataset::ConceptDataset(std::size_t num_queries, std::size_t num_classes,
                               std::vector<Sample> samples)
    : num_queries_(num_queries), num_classes_(num_classes), samples_(std::move(samples)) {
  if (num_queries_ == 0) {
    throw ConfigError("dataset: at least one query required");
  }
  if (num_classes_ == 0) {
    throw ConfigError("dataset: at least one class required");
  }
  std::unordered_set<std::string> seen;
  const std::size_t width = samples_.empty() ? 0 : samples_.front().features.size();
  for (const Sample& s : samples_) {
    if (s.answers.size() != num_queries_) {
      throw ConfigError("dataset: sample '" + s.id + "' has " + std::to_string(s.answers.size()) +
                        " answers, expected " + std::to_string(num_queries_));
    }
    for (Answer a : s.answers) {
      if (a != 1 && a != -1) {
        throw ConfigError("dataset: sample '" + s.id + "' has an answer outside {+1,-1}");
      }
    }
    if (s.label >= num_classes_) {
      throw ConfigError("dataset: sample '" + s.id + "' label " + std::to_string(s.label) +
                        " outside [0, " + std::to_string(num_classes_) + ")");
    }
    if (s.features.size() != width) {
      throw ConfigError("dataset: sample '" + s.id + "' has inconsistent feature width");
    }
    if (!seen.insert(s.id).second) {
      throw ConfigError("dataset: duplicate id '" + s.id + "'");
    }
  }
}

std::size_t ConceptDataset::feature_width() const noexcept {
  return samples_.empty() ? 0 : samples_.front().features.size();
}

std::optional<std::size_t> ConceptDataset::find(const std::string& id) const {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].id == id) {
      return i;
    }
  }
  return std::nullopt;
}

std::vector<std::size_t> ConceptDataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(samples_.size());
  for (const Sample& s : samples_) {
    out.push_back(s.label);
  }
  return out;
}

std::vector<AnswerVector> ConceptDataset::answers() const {
  std::vector<AnswerVector> out;
  out.reserve(samples_.size());
  for (const Sample& s : samples_) {
    out.push_back(s.answers);
  }
  return out;
}

ConceptDataset ConceptDataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Sample> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) {
    picked.push_back(samples_.at(i));
  }
  return ConceptDataset(num_queries_, num_classes_, std::move(picked));
}

ConceptDataset ConceptDataset::with_answers(const std::vector<AnswerVector>& answers) const {
  if (answers.size() != samples_.size()) {
    throw ConfigError("with_answers: answer count does not match sample count");
  }
  std::vector<Sample> copy = samples_;
  for (std::size_t i = 0; i < copy.size(); ++i) {
    copy[i].answers = answers[i];
  }
  return ConceptDataset(num_queries_, num_classes_, std::move(copy));
}

ConceptDataset load_concept_csv(const std::filesystem::path& path, std::size_t num_classes) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) {
    throw ParseError(path.string() + ": empty file", 1);
  }
  const auto header = detail::split_fields(lines[0]);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw ParseError(path.string() + ":1: header must start with id,label,c_1", 1);
  }
  std::size_t num_queries = 0;
  std::size_t num_features = 0;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name.rfind("c_", 0) == 0) {
      if (num_features > 0) {
        throw ParseError(path.string() + ":1: concept column '" + name + "' after feature columns",
                         1);
      }
      ++num_queries;
    } else if (name.rfind("f_", 0) == 0) {
      ++num_features;
    } else {
      throw ParseError(path.string() + ":1: unknown column '" + name + "'", 1);
    }
  }
  if (num_queries == 0) {
    throw ParseError(path.string() + ":1: no concept columns", 1);
  }

  std::vector<Sample> samples;
  std::size_t max_label = 0;
  std::unordered_set<std::string> seen;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) {
      continue;
    }
    const std::size_t line_no = li + 1;
    const auto fields = detail::split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Sample s;
    s.id = fields[0];
    if (s.id.empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": empty id", line_no);
    }
    if (!seen.insert(s.id).second) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + s.id +
                           "'",
                       line_no);
    }
    auto cell_error = [&](std::size_t col, const std::string& why) {
      return ParseError(path.string() + ":" + std::to_string(line_no) + ": column " +
                            std::to_string(col + 1) + " (" + header[col] + ") value '" +
                            fields[col] + "' " + why,
                        line_no);
    };
    try {
      s.label = detail::parse_index(fields[1]);
    } catch (const std::invalid_argument&) {
      throw cell_error(1, "is not a class index");
    }
    max_label = std::max(max_label, s.label);
    for (std::size_t m = 0; m < num_queries; ++m) {
      const std::string& cell = fields[2 + m];
      if (cell == "1" || cell == "+1") {
        s.answers.push_back(1);
      } else if (cell == "-1") {
        s.answers.push_back(-1);
      } else {
        throw cell_error(2 + m, "is not a concept answer in {-1,+1}");
      }
    }
    for (std::size_t f = 0; f < num_features; ++f) {
      const std::size_t col = 2 + num_queries + f;
      try {
        s.features.push_back(detail::parse_double(fields[col]));
      } catch (const std::invalid_argument&) {
        throw cell_error(col, "is not a real number");
      }
    }
    samples.push_back(std::move(s));
  }
  const std::size_t classes = std::max(num_classes, samples.empty() ? 1 : max_label + 1);
  return ConceptDataset(num_queries, classes, std::move(samples));
}

void save_concept_csv(const ConceptDataset& dataset, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "id,label";
  for (std::size_t m = 0; m < dataset.num_queries(); ++m) {
    out << ",c_" << (m + 1);
  }
  for (std::size_t f = 0; f < dataset.feature_width(); ++f) {
    out << ",f_" << (f + 1);
  }
  out << '\n';
  for (const Sample& s : dataset.samples()) {
    if (s.id.find(',') != std::string::npos) {
      throw ConfigError("save_concept_csv: id '" + s.id + "' contains a comma");
    }
    out << s.id << ',' << s.label;
    for (Answer a : s.answers) {
      out << ',' << (a > 0 ? "1" : "-1");
    }
    for (double f : s.features) {
      out << ',' << detail::format_double(f);
    }
    out << '\n';
  }
  detail::write_text(path, out.str());
}

std::uint64_t id_hash(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace uavip::data
