#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "text_io.hpp"
#include "uavip/concepts.hpp"
#include "uavip/error.hpp"

namespace uavip::concepts {

void export_probabilities(const ProbabilitySets& sets, const std::filesystem::path& path) {
  const auto& d = sets.distributions;
  d.validate();
  const std::size_t passes = sets.mc ? sets.mc->num_passes : 0;
  if (sets.mc) {
    sets.mc->validate();
    if (sets.mc->ids != d.ids || sets.mc->num_queries != d.num_queries) {
      throw ConfigError("export_probabilities: MC block does not match the distributions");
    }
  }
  std::ostringstream out;
  out << "id," << d.num_queries << ',' << passes << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.ids[i];
    for (double p : d.probs[i]) {
      out << ',' << detail::format_double(p);
    }
    out << '\n';
    for (std::size_t s = 0; s < passes; ++s) {
      out << d.ids[i] << ',' << (s + 1);
      for (double p : sets.mc->samples[i].row(s)) {
        out << ',' << detail::format_double(p);
      }
      out << '\n';
    }
  }
  detail::write_text(path, out.str());
}

ProbabilitySets import_probabilities(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  auto fail = [&](std::size_t line_no, const std::string& why) {
    return ParseError(path.string() + ":" + std::to_string(line_no) + ": " + why, line_no);
  };
  if (lines.empty()) {
    throw fail(1, "empty file");
  }
  const auto header = detail::split_fields(lines[0]);
  std::size_t m_count = 0;
  std::size_t passes = 0;
  try {
    if (header.size() != 3 || header[0] != "id") {
      throw std::invalid_argument("header");
    }
    m_count = detail::parse_index(header[1]);
    passes = detail::parse_index(header[2]);
  } catch (const std::invalid_argument&) {
    throw fail(1, "header must be id,<M>,<S>");
  }
  if (m_count == 0) {
    throw fail(1, "M must be positive");
  }
  if (passes == 1) {
    throw fail(1, "S must be 0 or at least 2");
  }

  ProbabilitySets sets;
  sets.distributions.num_queries = m_count;
  MCSampleSet mc;
  mc.num_queries = m_count;
  mc.num_passes = passes;
  std::size_t samples_with_mc = 0;
  std::size_t pending_passes = 0;  // MC lines seen for the current sample

  auto parse_prob = [&](const std::string& cell, std::size_t line_no) {
    double p = 0.0;
    try {
      p = detail::parse_double(cell);
    } catch (const std::invalid_argument&) {
      throw fail(line_no, "'" + cell + "' is not a real number");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
      throw fail(line_no, "probability " + cell + " outside [0,1]");
    }
    return p;
  };
  auto close_sample = [&](std::size_t line_no) {
    if (sets.distributions.ids.empty()) {
      return;
    }
    if (pending_passes != 0 && pending_passes != passes) {
      throw fail(line_no, "sample '" + sets.distributions.ids.back() + "' has " +
                              std::to_string(pending_passes) + " MC lines, expected " +
                              std::to_string(passes));
    }
    if (pending_passes == passes && passes > 0) {
      ++samples_with_mc;
    }
  };

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (lines[li].empty()) {
      continue;
    }
    const auto fields = detail::split_fields(lines[li]);
    if (fields.size() == m_count + 1) {
      close_sample(line_no);
      std::vector<double> row(m_count);
      for (std::size_t m = 0; m < m_count; ++m) {
        row[m] = parse_prob(fields[1 + m], line_no);
      }
      sets.distributions.ids.push_back(fields[0]);
      sets.distributions.probs.push_back(std::move(row));
      pending_passes = 0;
      if (passes > 0) {
        mc.ids.push_back(fields[0]);
        mc.samples.emplace_back(passes, m_count);
      }
    } else if (fields.size() == m_count + 2) {
      if (passes == 0) {
        throw fail(line_no, "MC line present but header declares S = 0");
      }
      if (sets.distributions.ids.empty() || fields[0] != sets.distributions.ids.back()) {
        throw fail(line_no, "MC line for '" + fields[0] + "' does not follow its sample line");
      }
      std::size_t s = 0;
      try {
        s = detail::parse_index(fields[1]);
      } catch (const std::invalid_argument&) {
        throw fail(line_no, "bad pass index '" + fields[1] + "'");
      }
      if (s != pending_passes + 1) {
        throw fail(line_no, "pass index " + fields[1] + " out of sequence");
      }
      if (s > passes) {
        throw fail(line_no, "more than S MC lines for '" + fields[0] + "'");
      }
      auto row = mc.samples.back().row(s - 1);
      for (std::size_t m = 0; m < m_count; ++m) {
        row[m] = parse_prob(fields[2 + m], line_no);
      }
      ++pending_passes;
    } else {
      throw fail(line_no, "expected " + std::to_string(m_count + 1) + " or " +
                              std::to_string(m_count + 2) + " fields, found " +
                              std::to_string(fields.size()));
    }
  }
  close_sample(lines.size());

  if (passes > 0) {
    const std::size_t n = sets.distributions.ids.size();
    if (samples_with_mc == n && n > 0) {
      sets.mc = std::move(mc);
    } else if (samples_with_mc != 0) {
      throw fail(lines.size(), "MC block present for only some samples");
    }
  }
  return sets;
}

ProbabilitySets select_ids(const ProbabilitySets& sets, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < sets.distributions.ids.size(); ++i) {
    where.emplace(sets.distributions.ids[i], i);
  }
  ProbabilitySets out;
  out.distributions.num_queries = sets.distributions.num_queries;
  if (sets.mc) {
    out.mc = MCSampleSet{};
    out.mc->num_queries = sets.mc->num_queries;
    out.mc->num_passes = sets.mc->num_passes;
  }
  for (const auto& id : ids) {
    auto it = where.find(id);
    if (it == where.end()) {
      throw ConfigError("probabilities: no entry for sample '" + id + "'");
    }
    out.distributions.ids.push_back(id);
    out.distributions.probs.push_back(sets.distributions.probs[it->second]);
    if (sets.mc) {
      out.mc->ids.push_back(id);
      out.mc->samples.push_back(sets.mc->samples[it->second]);
    }
  }
  return out;
}

}  // namespace uavip::concepts
