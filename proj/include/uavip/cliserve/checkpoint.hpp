#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavip/concepts.hpp"
#include "uavip/numcore/tensor.hpp"
#include "uavip/pursuit.hpp"

namespace uavip::cliserve {

// Layout (little-endian):
//   "UAVIPCKP" | u32 version | u32 kind | u64 n | n bytes JSON metadata |
//   u32 tensor count | per tensor: u64 rows, u64 cols, rows*cols f64 |
//   u64 FNV-1a of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { kPursuit = 1, kConcept = 2, kBaseline = 3 };
const char* to_string(CheckpointKind kind);

struct CheckpointContainer {
  CheckpointKind kind = CheckpointKind::kPursuit;
  nlohmann::json metadata;
  std::vector<numcore::Tensor2> tensors;
};

std::string encode_checkpoint(const CheckpointContainer& container);
// Throws ParseError carrying the byte offset of the first bad field.
CheckpointContainer decode_checkpoint(const std::string& bytes);

CheckpointContainer to_container(const pursuit::PursuitModel& model);
CheckpointContainer to_container(const pursuit::FullConceptModel& model);
CheckpointContainer to_container(const concepts::ConceptModelParams& model);
pursuit::PursuitModel pursuit_from_container(const CheckpointContainer& container);
pursuit::FullConceptModel baseline_from_container(const CheckpointContainer& container);
concepts::ConceptModelParams concept_from_container(const CheckpointContainer& container);

template <typename Model>
void save_checkpoint(const Model& model, const std::filesystem::path& path);

CheckpointContainer read_checkpoint(const std::filesystem::path& path);
pursuit::PursuitModel load_pursuit_checkpoint(const std::filesystem::path& path);
pursuit::FullConceptModel load_baseline_checkpoint(const std::filesystem::path& path);
concepts::ConceptModelParams load_concept_checkpoint(const std::filesystem::path& path);

}  // namespace uavip::cliserve
