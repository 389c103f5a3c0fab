#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace uavip {

// Binary concept answer: +1 present, -1 absent. 0 only ever means "not
// asked" (history encodings) or "not sure" (live answers), never "absent".
using Answer = std::int8_t;
using AnswerVector = std::vector<Answer>;

// Per-sample uncertainty mask; 1 excludes the query from the pursuit.
using Mask = std::vector<std::uint8_t>;

inline Answer answer_from_probability(double p) { return p >= 0.5 ? Answer{1} : Answer{-1}; }

}  // namespace uavip
