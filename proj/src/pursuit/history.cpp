#include <stdexcept>
#include <string>

#include "uavip/error.hpp"
#include "uavip/pursuit.hpp"

namespace uavip::pursuit {

void History::record(std::size_t query, Answer answer) {
  if (query >= answers_.size()) {
    throw ConfigError("history: query index " + std::to_string(query) + " out of range");
  }
  if (answer != 1 && answer != -1) {
    throw ConfigError("history: answers must be +1 or -1");
  }
  if (answers_[query] != 0) {
    throw ConfigError("history: query " + std::to_string(query) + " already asked");
  }
  answers_[query] = answer;
  order_.push_back(query);
}

EncodedInput encode_input(const History& history, const Mask& mask) {
  const std::size_t m_count = history.num_queries();
  if (!mask.empty() && mask.size() != m_count) {
    throw ConfigError("encode_input: mask length differs from the number of queries");
  }
  EncodedInput out;
  out.classifier.resize(m_count);
  out.querier.resize(2 * m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const double h = static_cast<double>(history.answers()[m]);
    const bool masked = !mask.empty() && mask[m] != 0;
    out.classifier[m] = h;
    out.querier[m] = h;
    out.querier[m_count + m] = (!history.asked(m) && !masked) ? 1.0 : 0.0;
  }
  return out;
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kVip: return "vip";
    case Variant::kUavEntropy: return "uav_entropy";
    case Variant::kUavMc: return "uav_mc";
    case Variant::kUavOracle: return "uav_oracle";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  if (name == "vip") return Variant::kVip;
  if (name == "uav_entropy") return Variant::kUavEntropy;
  if (name == "uav_mc") return Variant::kUavMc;
  if (name == "uav_oracle") return Variant::kUavOracle;
  throw ConfigError("unknown variant '" + name +
                    "' (expected vip, uav_entropy, uav_mc or uav_oracle)");
}

const char* to_string(Termination t) {
  return t == Termination::kConfidence ? "confidence" : "exhausted";
}

}  // namespace uavip::pursuit
