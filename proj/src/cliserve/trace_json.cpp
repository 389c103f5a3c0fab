#include "uavip/cliserve/trace_json.hpp"

#include "uavip/error.hpp"

namespace uavip::cliserve {

using nlohmann::json;

json trace_to_json(const pursuit::ExplanationTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"query", s.query}, {"answer", static_cast<int>(s.answer)}, {"posterior", s.posterior}});
  }
  return {{"id", trace.id},
          {"prior", trace.prior},
          {"steps", steps},
          {"masked", trace.masked},
          {"termination", pursuit::to_string(trace.termination)},
          {"predicted", trace.predicted},
          {"confidence", trace.confidence}};
}

pursuit::ExplanationTrace trace_from_json(const json& j) {
  try {
    pursuit::ExplanationTrace t;
    t.id = j.at("id").get<std::string>();
    t.prior = j.at("prior").get<std::vector<double>>();
    for (const auto& s : j.at("steps")) {
      t.steps.push_back({s.at("query").get<std::size_t>(), static_cast<Answer>(s.at("answer").get<int>()),
                         s.at("posterior").get<std::vector<double>>()});
    }
    t.masked = j.at("masked").get<std::vector<std::size_t>>();
    const auto term = j.at("termination").get<std::string>();
    if (term == "confidence") {
      t.termination = pursuit::Termination::kConfidence;
    } else if (term == "exhausted") {
      t.termination = pursuit::Termination::kExhausted;
    } else {
      throw ConfigError("trace: unknown termination '" + term + "'");
    }
    t.predicted = j.at("predicted").get<std::size_t>();
    t.confidence = j.at("confidence").get<double>();
    return t;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("trace JSON is malformed: ") + e.what());
  }
}

std::string trace_line(const pursuit::ExplanationTrace& trace) { return trace_to_json(trace).dump(); }

}  // namespace uavip::cliserve
