#pragma once

#include <string>

#include <json.hpp>

#include "uavip/pursuit.hpp"

namespace uavip::cliserve {

// {id, steps:[{query, answer, posterior[]}], masked[], termination, predicted, confidence}
nlohmann::json trace_to_json(const pursuit::ExplanationTrace& trace);
pursuit::ExplanationTrace trace_from_json(const nlohmann::json& j);

// Compact single-line dump; doubles print in shortest round-trip form.
std::string trace_line(const pursuit::ExplanationTrace& trace);

}  // namespace uavip::cliserve
