#include "uavip/cliserve/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "uavip/error.hpp"
#include "uavip/rng.hpp"

namespace uavip::cliserve {

using nlohmann::json;

namespace {

// Consumes keys from one JSON object; finish() rejects leftovers.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) {
      throw ConfigError(label() + ": expected an object");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) { return j_.at(key); }
  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) {
      return;
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + path(key) + "' has the wrong type");
    }
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("unknown config key '" + path(item.key()) + "'");
      }
    }
  }

 private:
  std::string label() const { return where_.empty() ? "config" : "config key '" + where_ + "'"; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

// Unsigned integers only; rejects negatives and fractions that nlohmann would coerce.
template <typename T>
void get_count(ObjectReader& r, const std::string& key, T& out) {
  if (!r.has(key)) {
    return;
  }
  const json& v = r.raw(key);
  if (!v.is_number_unsigned()) {
    throw ConfigError("config key '" + r.path(key) + "' must be a non-negative integer");
  }
  out = v.get<T>();
}

template <typename T>
void get_count_list(ObjectReader& r, const std::string& key, std::vector<T>& out) {
  if (!r.has(key)) {
    return;
  }
  const json& v = r.raw(key);
  if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_unsigned(); })) {
    throw ConfigError("config key '" + r.path(key) + "' must be a list of non-negative integers");
  }
  out = v.get<std::vector<T>>();
}

AnswerVector signs_from_json(const json& row, const std::string& where) {
  if (!row.is_array()) {
    throw ConfigError("config key '" + where + "' must be a list of +1/-1");
  }
  AnswerVector out;
  for (const auto& v : row) {
    if (!v.is_number_integer() || (v.get<int>() != 1 && v.get<int>() != -1)) {
      throw ConfigError("config key '" + where + "' must contain only +1 or -1");
    }
    out.push_back(static_cast<Answer>(v.get<int>()));
  }
  return out;
}

}  // namespace

const char* to_string(DatasetSource s) { return s == DatasetSource::kSynth ? "synth" : "csv"; }

const char* to_string(AnswerSource s) {
  switch (s) {
    case AnswerSource::kTruth: return "truth";
    case AnswerSource::kConceptModel: return "concept_model";
    case AnswerSource::kSimulator: return "simulator";
    case AnswerSource::kImport: return "import";
  }
  return "?";
}

bool is_known_method(const std::string& name) {
  if (name == "cbm") {
    return true;
  }
  try {
    pursuit::variant_from_string(name);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

data::JointSpec default_joint(std::size_t num_classes, std::size_t num_queries, std::uint64_t seed) {
  if (num_classes < 2 || num_queries == 0) {
    throw ConfigError("default_joint: need K >= 2 and M >= 1");
  }
  data::JointSpec spec;
  spec.num_classes = num_classes;
  spec.num_queries = num_queries;
  spec.prior.assign(num_classes, 1.0 / static_cast<double>(num_classes));
  Rng rng = Rng::stream(seed, 0x6a6f696eULL);
  spec.reliability.resize(num_queries);
  for (std::size_t m = 0; m < num_queries; ++m) {
    spec.reliability[m] = num_queries == 1
                              ? 0.95
                              : 0.95 - 0.35 * static_cast<double>(m) / static_cast<double>(num_queries - 1);
  }
  rng.shuffle(spec.reliability);
  const bool can_be_distinct = num_queries >= 64 || (std::size_t{1} << num_queries) >= num_classes;
  for (std::size_t k = 0; k < num_classes; ++k) {
    AnswerVector row(num_queries);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (auto& a : row) {
        a = rng.bernoulli(0.5) ? Answer{1} : Answer{-1};
      }
      if (!can_be_distinct ||
          std::find(spec.truth_table.begin(), spec.truth_table.end(), row) == spec.truth_table.end()) {
        break;
      }
    }
    spec.truth_table.push_back(row);
  }
  return spec;
}

data::JointSpec joint_spec_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  std::size_t k = 2, m = 8;
  std::uint64_t signature_seed = 0;
  get_count(r, "num_classes", k);
  get_count(r, "num_queries", m);
  get_count(r, "signature_seed", signature_seed);
  data::JointSpec spec = default_joint(k, m, signature_seed);
  r.get("prior", spec.prior);
  r.get("reliability", spec.reliability);
  if (r.has("truth_table")) {
    const json& rows = r.raw("truth_table");
    if (!rows.is_array()) {
      throw ConfigError("config key '" + r.path("truth_table") + "' must be a list of rows");
    }
    spec.truth_table.clear();
    for (const auto& row : rows) {
      spec.truth_table.push_back(signs_from_json(row, r.path("truth_table")));
    }
  }
  if (r.has("noise")) {
    ObjectReader n(r.raw("noise"), r.path("noise"));
    n.get("sigma_low", spec.noise.sigma_low);
    n.get("sigma_high", spec.noise.sigma_high);
    n.get("p_high", spec.noise.p_high);
    n.finish();
  }
  r.finish();
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + where + "': " + e.what());
  }
  return spec;
}

json joint_spec_to_json(const data::JointSpec& spec) {
  json rows = json::array();
  for (const auto& row : spec.truth_table) {
    json r = json::array();
    for (Answer a : row) {
      r.push_back(static_cast<int>(a));
    }
    rows.push_back(r);
  }
  return {{"num_classes", spec.num_classes},
          {"num_queries", spec.num_queries},
          {"prior", spec.prior},
          {"reliability", spec.reliability},
          {"truth_table", rows},
          {"noise",
           {{"sigma_low", spec.noise.sigma_low},
            {"sigma_high", spec.noise.sigma_high},
            {"p_high", spec.noise.p_high}}}};
}

pursuit::TrainingConfig training_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  pursuit::TrainingConfig c;
  get_count(r, "epochs", c.epochs);
  r.get("lr", c.lr);
  get_count(r, "batch_size", c.batch_size);
  r.get("tau_start", c.tau_start);
  r.get("tau_end", c.tau_end);
  get_count_list(r, "hidden", c.hidden);
  if (r.has("select_mode")) {
    std::string mode;
    r.get("select_mode", mode);
    if (mode == "argmax") {
      c.select_mode = numcore::SelectMode::kArgmax;
    } else if (mode == "sample") {
      c.select_mode = numcore::SelectMode::kSample;
    } else {
      throw ConfigError("config key '" + r.path("select_mode") + "' must be argmax or sample");
    }
  }
  get_count(r, "sequential_epochs", c.sequential_epochs);
  get_count(r, "seed", c.seed);
  r.finish();
  return c;
}

json training_to_json(const pursuit::TrainingConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"tau_start", c.tau_start},
          {"tau_end", c.tau_end},
          {"hidden", c.hidden},
          {"select_mode", c.select_mode == numcore::SelectMode::kArgmax ? "argmax" : "sample"},
          {"sequential_epochs", c.sequential_epochs},
          {"seed", c.seed}};
}

concepts::SimulatorConfig simulator_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  concepts::SimulatorConfig c;
  r.get("accuracy", c.accuracy);
  r.get("ambiguity", c.ambiguity);
  r.get("band_low", c.band_low);
  r.get("band_high", c.band_high);
  r.get("confident_mean", c.confident_mean);
  r.get("concentration", c.concentration);
  get_count(r, "passes", c.passes);
  r.get("jitter_confident", c.jitter_confident);
  r.get("jitter_wrong", c.jitter_wrong);
  r.get("jitter_ambiguous", c.jitter_ambiguous);
  get_count(r, "seed", c.seed);
  r.finish();
  return c;
}

json simulator_to_json(const concepts::SimulatorConfig& c) {
  return {{"accuracy", c.accuracy},
          {"ambiguity", c.ambiguity},
          {"band_low", c.band_low},
          {"band_high", c.band_high},
          {"confident_mean", c.confident_mean},
          {"concentration", c.concentration},
          {"passes", c.passes},
          {"jitter_confident", c.jitter_confident},
          {"jitter_wrong", c.jitter_wrong},
          {"jitter_ambiguous", c.jitter_ambiguous},
          {"seed", c.seed}};
}

namespace {

concepts::ConceptModelConfig concept_model_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  concepts::ConceptModelConfig c;
  get_count_list(r, "hidden", c.hidden);
  get_count(r, "epochs", c.epochs);
  r.get("lr", c.lr);
  get_count(r, "batch_size", c.batch_size);
  r.get("dropout", c.dropout);
  get_count(r, "seed", c.seed);
  r.finish();
  return c;
}

json concept_model_to_json(const concepts::ConceptModelConfig& c) {
  return {{"hidden", c.hidden},     {"epochs", c.epochs},   {"lr", c.lr},
          {"batch_size", c.batch_size}, {"dropout", c.dropout}, {"seed", c.seed}};
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "");
  if (r.has("dataset")) {
    ObjectReader d(r.raw("dataset"), "dataset");
    if (d.has("source")) {
      std::string s;
      d.get("source", s);
      if (s == "synth") {
        c.dataset.source = DatasetSource::kSynth;
      } else if (s == "csv") {
        c.dataset.source = DatasetSource::kCsv;
      } else {
        throw ConfigError("config key 'dataset.source' must be synth or csv");
      }
    }
    d.get("csv_path", c.dataset.csv_path);
    get_count(d, "num_classes", c.dataset.num_classes);
    if (d.has("synth")) {
      ObjectReader s(d.raw("synth"), "dataset.synth");
      get_count(s, "samples", c.dataset.synth.samples);
      get_count(s, "seed", c.dataset.synth.seed);
      if (s.has("joint")) {
        c.dataset.synth.spec = joint_spec_from_json(s.raw("joint"), "dataset.synth.joint");
      }
      s.finish();
    }
    d.finish();
  }
  if (r.has("answers")) {
    ObjectReader a(r.raw("answers"), "answers");
    if (a.has("source")) {
      std::string s;
      a.get("source", s);
      if (s == "truth") {
        c.answers.source = AnswerSource::kTruth;
      } else if (s == "concept_model") {
        c.answers.source = AnswerSource::kConceptModel;
      } else if (s == "simulator") {
        c.answers.source = AnswerSource::kSimulator;
      } else if (s == "import") {
        c.answers.source = AnswerSource::kImport;
      } else {
        throw ConfigError(
            "config key 'answers.source' must be truth, concept_model, simulator or import");
      }
    }
    a.get("import_path", c.answers.import_path);
    if (a.has("simulator")) {
      c.answers.simulator = simulator_from_json(a.raw("simulator"), "answers.simulator");
    }
    if (a.has("concept_model")) {
      c.answers.concept_model = concept_model_from_json(a.raw("concept_model"), "answers.concept_model");
    }
    get_count(a, "mc_passes", c.answers.mc_passes);
    a.finish();
  }
  if (r.has("corruption")) {
    ObjectReader k(r.raw("corruption"), "corruption");
    get_count_list(k, "flips", c.corruption.flips);
    k.finish();
  }
  r.get("methods", c.methods);
  r.get("reference", c.reference);
  if (r.has("uncertainty")) {
    ObjectReader u(r.raw("uncertainty"), "uncertainty");
    u.get("entropy_threshold", c.uncertainty.entropy_threshold);
    if (u.has("mc_score")) {
      std::string s;
      u.get("mc_score", s);
      c.uncertainty.mc_score = uncertainty::mc_score_from_string(s);
    }
    if (u.has("mc_threshold")) {
      double t = 0.0;
      u.get("mc_threshold", t);
      c.uncertainty.mc_threshold = t;
    }
    u.finish();
  }
  if (r.has("training")) {
    c.training = training_from_json(r.raw("training"), "training");
  }
  if (r.has("inference")) {
    ObjectReader i(r.raw("inference"), "inference");
    i.get("stop_threshold", c.inference.stop_threshold);
    if (i.has("budget")) {
      std::size_t b = 0;
      get_count(i, "budget", b);
      c.inference.budget = b;
    }
    i.finish();
  }
  if (r.has("split")) {
    ObjectReader s(r.raw("split"), "split");
    s.get("train", c.split.train);
    s.get("val", c.split.val);
    s.get("test", c.split.test);
    s.finish();
  }
  get_count_list(r, "seeds", c.seeds);
  get_count_list(r, "error_bins", c.error_bins);
  r.get("output_dir", c.output_dir);
  r.get("save_checkpoints", c.save_checkpoints);
  r.get("save_traces", c.save_traces);
  get_count(r, "threads", c.threads);
  r.finish();
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = {{"source", to_string(c.dataset.source)},
                  {"csv_path", c.dataset.csv_path},
                  {"num_classes", c.dataset.num_classes},
                  {"synth",
                   {{"samples", c.dataset.synth.samples},
                    {"seed", c.dataset.synth.seed},
                    {"joint", joint_spec_to_json(c.dataset.synth.spec)}}}};
  j["answers"] = {{"source", to_string(c.answers.source)},
                  {"import_path", c.answers.import_path},
                  {"simulator", simulator_to_json(c.answers.simulator)},
                  {"concept_model", concept_model_to_json(c.answers.concept_model)},
                  {"mc_passes", c.answers.mc_passes}};
  j["corruption"] = {{"flips", c.corruption.flips}};
  j["methods"] = c.methods;
  j["reference"] = c.reference;
  j["uncertainty"] = {{"entropy_threshold", c.uncertainty.entropy_threshold},
                      {"mc_score", uncertainty::to_string(c.uncertainty.mc_score)},
                      {"mc_threshold", c.uncertainty.mc_threshold ? json(*c.uncertainty.mc_threshold)
                                                                  : json(nullptr)}};
  j["training"] = training_to_json(c.training);
  j["inference"] = {{"stop_threshold", c.inference.stop_threshold},
                    {"budget", c.inference.budget ? json(*c.inference.budget) : json(nullptr)}};
  j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
  j["seeds"] = c.seeds;
  j["error_bins"] = c.error_bins;
  j["output_dir"] = c.output_dir;
  j["save_checkpoints"] = c.save_checkpoints;
  j["save_traces"] = c.save_traces;
  j["threads"] = c.threads;
  return j;
}

void ExperimentConfig::validate() const {
  if (dataset.source == DatasetSource::kCsv && dataset.csv_path.empty()) {
    throw ConfigError("config key 'dataset.csv_path' is required for csv datasets");
  }
  if (dataset.source == DatasetSource::kSynth) {
    dataset.synth.spec.validate();
    if (dataset.synth.samples == 0) {
      throw ConfigError("config key 'dataset.synth.samples' must be positive");
    }
  }
  if (answers.source == AnswerSource::kImport && answers.import_path.empty()) {
    throw ConfigError("config key 'answers.import_path' is required for imported answers");
  }
  if (answers.source == AnswerSource::kSimulator) {
    answers.simulator.validate();
  }
  if (answers.source == AnswerSource::kConceptModel && answers.mc_passes < 2 &&
      std::find(methods.begin(), methods.end(), "uav_mc") != methods.end()) {
    throw ConfigError("config key 'answers.mc_passes' must be at least 2 for uav_mc");
  }
  if (methods.empty()) {
    throw ConfigError("config key 'methods' must name at least one method");
  }
  std::set<std::string> unique;
  for (const auto& m : methods) {
    if (!is_known_method(m)) {
      throw ConfigError("config key 'methods': unknown method '" + m + "'");
    }
    if (!unique.insert(m).second) {
      throw ConfigError("config key 'methods': duplicate method '" + m + "'");
    }
    if (answers.source == AnswerSource::kTruth && (m == "uav_entropy" || m == "uav_mc")) {
      throw ConfigError("method '" + m +
                        "' needs answer probabilities; truth answers carry none (use simulator, "
                        "concept_model or import)");
    }
  }
  uncertainty::UncertaintyConfig{uncertainty.entropy_threshold, uncertainty.mc_score}.validate();
  if (uncertainty.mc_threshold && !(*uncertainty.mc_threshold >= 0.0)) {
    throw ConfigError("config key 'uncertainty.mc_threshold' must be non-negative");
  }
  training.validate();
  if (!(inference.stop_threshold > 0.0 && inference.stop_threshold <= 1.0)) {
    throw ConfigError("config key 'inference.stop_threshold' must lie in (0, 1]");
  }
  split.validate();
  if (seeds.empty()) {
    throw ConfigError("config key 'seeds' must list at least one seed");
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("config key 'seeds' contains duplicates");
  }
  if (error_bins.empty() || error_bins.front() != 0 ||
      !std::is_sorted(error_bins.begin(), error_bins.end()) ||
      std::adjacent_find(error_bins.begin(), error_bins.end()) != error_bins.end()) {
    throw ConfigError("config key 'error_bins' must be strictly ascending from 0");
  }
  if (output_dir.empty()) {
    throw ConfigError("config key 'output_dir' must not be empty");
  }
  if (threads == 0) {
    throw ConfigError("config key 'threads' must be positive");
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON (byte " +
                      std::to_string(e.byte) + ")");
  }
  return config_from_json(j);
}

}  // namespace uavip::cliserve
