#include "uavip/cliserve/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "text_io.hpp"
#include "uavip/cliserve/config.hpp"
#include "uavip/error.hpp"

namespace uavip::cliserve {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'U', 'A', 'V', 'I', 'P', 'C', 'K', 'P'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename U>
void put(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFFU));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U take(const char* what) {
    need(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return value;
  }

  std::string take_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                           std::to_string(pos_),
                       pos_);
    }
  }

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

[[noreturn]] void bad(const std::string& what, std::size_t offset) {
  throw ParseError("checkpoint: " + what + " at byte " + std::to_string(offset), offset);
}

void push_mlp(std::vector<numcore::Tensor2>& out, const numcore::Mlp& mlp) {
  for (const auto* p : mlp.parameters()) {
    out.push_back(*p);
  }
}

numcore::Mlp pop_mlp(const std::vector<numcore::Tensor2>& tensors, std::size_t& next,
                     std::size_t layers) {
  if (tensors.size() < next + 2 * layers) {
    throw ParseError("checkpoint: fewer tensors than the metadata declares", 0);
  }
  numcore::Mlp mlp;
  for (std::size_t l = 0; l < layers; ++l) {
    mlp.layers.push_back({tensors[next], tensors[next + 1]});
    next += 2;
  }
  numcore::validate(mlp);
  return mlp;
}

numcore::Tensor2 row_of(const std::vector<double>& v) { return numcore::Tensor2(1, v.size(), v); }

void expect_kind(const CheckpointContainer& c, CheckpointKind kind) {
  if (c.kind != kind) {
    throw ConfigError(std::string("checkpoint holds a ") + to_string(c.kind) + " model, expected " +
                      to_string(kind));
  }
}

template <typename T>
T meta(const json& m, const char* key) {
  try {
    return m.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("checkpoint metadata lacks a valid '") + key + "'", 0);
  }
}

}  // namespace

const char* to_string(CheckpointKind kind) {
  switch (kind) {
    case CheckpointKind::kPursuit: return "pursuit";
    case CheckpointKind::kConcept: return "concept";
    case CheckpointKind::kBaseline: return "baseline";
  }
  return "?";
}

std::string encode_checkpoint(const CheckpointContainer& c) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.kind));
  const std::string meta_text = c.metadata.dump();
  put<std::uint64_t>(out, meta_text.size());
  out += meta_text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    put<std::uint64_t>(out, t.rows());
    put<std::uint64_t>(out, t.cols());
    for (double v : t.values()) {
      put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  put<std::uint64_t>(out, fnv1a(out.data(), out.size()));
  return out;
}

CheckpointContainer decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.take_bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    bad("not a checkpoint file (bad magic)", 0);
  }
  const std::size_t version_at = r.pos();
  const auto version = r.take<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint format version " + std::to_string(version) +
                         " is not supported (this build reads version " +
                         std::to_string(kCheckpointVersion) + "); re-save the model with this build",
                     version_at);
  }
  CheckpointContainer c;
  const std::size_t kind_at = r.pos();
  const auto kind = r.take<std::uint32_t>("kind");
  if (kind < 1 || kind > 3) {
    bad("unknown model kind " + std::to_string(kind), kind_at);
  }
  c.kind = static_cast<CheckpointKind>(kind);
  const std::size_t meta_at = r.pos();
  const auto meta_len = r.take<std::uint64_t>("metadata length");
  if (meta_len > r.remaining()) {
    bad("metadata length exceeds file size", meta_at);
  }
  const std::size_t meta_text_at = r.pos();
  try {
    c.metadata = json::parse(r.take_bytes(meta_len, "metadata"));
  } catch (const json::parse_error&) {
    bad("metadata is not valid JSON", meta_text_at);
  }
  const auto count = r.take<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t shape_at = r.pos();
    const auto rows = r.take<std::uint64_t>("tensor rows");
    const auto cols = r.take<std::uint64_t>("tensor cols");
    if (cols != 0 && rows > r.remaining() / 8 / cols) {
      bad("tensor " + std::to_string(i) + " shape exceeds file size", shape_at);
    }
    std::vector<double> values(rows * cols);
    for (auto& v : values) {
      v = std::bit_cast<double>(r.take<std::uint64_t>("tensor data"));
    }
    c.tensors.emplace_back(rows, cols, std::move(values));
  }
  const std::size_t checksum_at = r.pos();
  const auto stored = r.take<std::uint64_t>("checksum");
  if (stored != fnv1a(bytes.data(), checksum_at)) {
    bad("checksum mismatch", checksum_at);
  }
  if (r.remaining() != 0) {
    bad("trailing bytes after checksum", r.pos());
  }
  return c;
}

CheckpointContainer to_container(const pursuit::PursuitModel& model) {
  model.validate();
  CheckpointContainer c;
  c.kind = CheckpointKind::kPursuit;
  c.metadata = {{"num_queries", model.num_queries},
                {"num_classes", model.num_classes},
                {"variant", pursuit::to_string(model.variant)},
                {"mc_score", model.mc_score},
                {"has_mask_threshold", model.mask_threshold.has_value()},
                {"training", training_to_json(model.config)},
                {"querier_layers", model.querier.layers.size()},
                {"classifier_layers", model.classifier.layers.size()}};
  push_mlp(c.tensors, model.querier);
  push_mlp(c.tensors, model.classifier);
  c.tensors.push_back(row_of(model.loss_curve));
  c.tensors.push_back(row_of({model.final_val_loss, model.mask_threshold.value_or(0.0)}));
  return c;
}

pursuit::PursuitModel pursuit_from_container(const CheckpointContainer& c) {
  expect_kind(c, CheckpointKind::kPursuit);
  pursuit::PursuitModel m;
  m.num_queries = meta<std::size_t>(c.metadata, "num_queries");
  m.num_classes = meta<std::size_t>(c.metadata, "num_classes");
  m.variant = pursuit::variant_from_string(meta<std::string>(c.metadata, "variant"));
  m.mc_score = meta<std::string>(c.metadata, "mc_score");
  m.config = training_from_json(c.metadata.at("training"), "training");
  std::size_t next = 0;
  m.querier = pop_mlp(c.tensors, next, meta<std::size_t>(c.metadata, "querier_layers"));
  m.classifier = pop_mlp(c.tensors, next, meta<std::size_t>(c.metadata, "classifier_layers"));
  if (c.tensors.size() != next + 2 || c.tensors[next + 1].size() != 2) {
    throw ParseError("checkpoint: pursuit tensor layout does not match the metadata", 0);
  }
  m.loss_curve = c.tensors[next].values();
  m.final_val_loss = c.tensors[next + 1][0];
  if (meta<bool>(c.metadata, "has_mask_threshold")) {
    m.mask_threshold = c.tensors[next + 1][1];
  }
  m.validate();
  return m;
}

CheckpointContainer to_container(const pursuit::FullConceptModel& model) {
  CheckpointContainer c;
  c.kind = CheckpointKind::kBaseline;
  c.metadata = {{"num_queries", model.num_queries},
                {"num_classes", model.num_classes},
                {"training", training_to_json(model.config)},
                {"classifier_layers", model.classifier.layers.size()}};
  push_mlp(c.tensors, model.classifier);
  c.tensors.push_back(row_of(model.loss_curve));
  return c;
}

pursuit::FullConceptModel baseline_from_container(const CheckpointContainer& c) {
  expect_kind(c, CheckpointKind::kBaseline);
  pursuit::FullConceptModel m;
  m.num_queries = meta<std::size_t>(c.metadata, "num_queries");
  m.num_classes = meta<std::size_t>(c.metadata, "num_classes");
  m.config = training_from_json(c.metadata.at("training"), "training");
  std::size_t next = 0;
  m.classifier = pop_mlp(c.tensors, next, meta<std::size_t>(c.metadata, "classifier_layers"));
  if (c.tensors.size() != next + 1) {
    throw ParseError("checkpoint: baseline tensor layout does not match the metadata", 0);
  }
  m.loss_curve = c.tensors[next].values();
  if (m.classifier.input_width() != m.num_queries || m.classifier.output_width() != m.num_classes) {
    throw ParseError("checkpoint: baseline widths disagree with M and K", 0);
  }
  return m;
}

CheckpointContainer to_container(const concepts::ConceptModelParams& model) {
  CheckpointContainer c;
  c.kind = CheckpointKind::kConcept;
  c.metadata = {{"seed", model.seed},
                {"epochs", model.epochs},
                {"layers", model.mlp.layers.size()}};
  push_mlp(c.tensors, model.mlp);
  c.tensors.push_back(row_of(model.loss_curve));
  c.tensors.push_back(row_of({model.dropout_rate}));
  return c;
}

concepts::ConceptModelParams concept_from_container(const CheckpointContainer& c) {
  expect_kind(c, CheckpointKind::kConcept);
  concepts::ConceptModelParams m;
  m.seed = meta<std::uint64_t>(c.metadata, "seed");
  m.epochs = meta<std::size_t>(c.metadata, "epochs");
  std::size_t next = 0;
  m.mlp = pop_mlp(c.tensors, next, meta<std::size_t>(c.metadata, "layers"));
  if (c.tensors.size() != next + 2 || c.tensors[next + 1].size() != 1) {
    throw ParseError("checkpoint: concept tensor layout does not match the metadata", 0);
  }
  m.loss_curve = c.tensors[next].values();
  m.dropout_rate = c.tensors[next + 1][0];
  return m;
}

template <typename Model>
void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  detail::write_text(path, encode_checkpoint(to_container(model)));
}

template void save_checkpoint(const pursuit::PursuitModel&, const std::filesystem::path&);
template void save_checkpoint(const pursuit::FullConceptModel&, const std::filesystem::path&);
template void save_checkpoint(const concepts::ConceptModelParams&, const std::filesystem::path&);

CheckpointContainer read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open checkpoint " + path.string());
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

pursuit::PursuitModel load_pursuit_checkpoint(const std::filesystem::path& path) {
  return pursuit_from_container(read_checkpoint(path));
}

pursuit::FullConceptModel load_baseline_checkpoint(const std::filesystem::path& path) {
  return baseline_from_container(read_checkpoint(path));
}

concepts::ConceptModelParams load_concept_checkpoint(const std::filesystem::path& path) {
  return concept_from_container(read_checkpoint(path));
}

}  // namespace uavip::cliserve
