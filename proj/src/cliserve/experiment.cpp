#include "uavip/cliserve/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <memory>
#include <sstream>

#include "text_io.hpp"
#include "uavip/cliserve/checkpoint.hpp"
#include "uavip/cliserve/trace_json.hpp"
#include "uavip/concepts.hpp"
#include "uavip/error.hpp"
#include "uavip/oracle.hpp"
#include "uavip/rng.hpp"
#include "uavip/uncertainty.hpp"

namespace uavip::cliserve {

using nlohmann::json;

namespace {

enum Stage : std::uint64_t {
  kStageAnswers = 1,
  kStageConceptTrain = 2,
  kStageConceptMc = 3,
  kStageCorruption = 4,
  kStageTraining = 5,
};

struct AnswerState {
  std::vector<AnswerVector> truth;
  std::vector<AnswerVector> answers;  // what the models see
  std::optional<uncertainty::UncertaintyTable> table;
};

AnswerState build_answers(const ExperimentConfig& config, const data::ConceptDataset& ds,
                          const data::Split& split, std::uint64_t seed) {
  AnswerState state;
  state.truth = ds.answers();
  std::optional<concepts::ProbabilitySets> probs;
  switch (config.answers.source) {
    case AnswerSource::kTruth:
      state.answers = state.truth;
      break;
    case AnswerSource::kSimulator: {
      auto sim = config.answers.simulator;
      sim.seed = derive_seed(sim.seed, seed, kStageAnswers);
      auto out = concepts::simulate_answers(ds, sim);
      probs = concepts::ProbabilitySets{std::move(out.distributions), std::move(out.mc)};
      break;
    }
    case AnswerSource::kConceptModel: {
      auto cfg = config.answers.concept_model;
      cfg.seed = derive_seed(cfg.seed, seed, kStageConceptTrain);
      const auto model = concepts::train_concept_model(split.train, cfg);
      concepts::ProbabilitySets sets{concepts::predict_distributions(model, ds), std::nullopt};
      if (config.answers.mc_passes >= 2 && model.dropout_rate > 0.0) {
        sets.mc = concepts::mc_sample_distributions(
            model, ds, config.answers.mc_passes, derive_seed(cfg.seed, seed, kStageConceptMc));
      }
      probs = std::move(sets);
      break;
    }
    case AnswerSource::kImport: {
      std::vector<std::string> ids;
      for (const auto& s : ds.samples()) {
        ids.push_back(s.id);
      }
      probs = concepts::select_ids(concepts::import_probabilities(config.answers.import_path), ids);
      break;
    }
  }
  if (probs) {
    if (probs->distributions.num_queries != ds.num_queries()) {
      throw ConfigError("answer probabilities have " +
                        std::to_string(probs->distributions.num_queries) +
                        " queries but the dataset has " + std::to_string(ds.num_queries()));
    }
    state.answers = probs->distributions.predicted_answers();
    state.table = uncertainty::estimate(*probs);
  }
  if (!config.corruption.flips.empty()) {
    const std::uint64_t base = derive_seed(0, seed, kStageCorruption);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& id = ds[i].id;
      Rng pick = Rng::stream(base, data::id_hash(id));
      const std::size_t j = config.corruption.flips[pick.uniform_index(config.corruption.flips.size())];
      std::vector<AnswerVector> one{state.answers[i]};
      data::corrupt_in_place(one, {id}, std::min(j, ds.num_queries()), splitmix64(base));
      state.answers[i] = std::move(one.front());
    }
  }
  return state;
}

std::vector<Mask> masks_for(const std::string& method, const std::vector<Mask>& entropy,
                            const std::vector<Mask>& mc, const std::vector<Mask>& oracle_masks) {
  if (method == "uav_entropy") {
    return entropy;
  }
  if (method == "uav_mc") {
    return mc;
  }
  if (method == "uav_oracle") {
    return oracle_masks;
  }
  return {};
}

template <typename T>
std::vector<T> pick(const std::vector<T>& all, const std::vector<std::size_t>& indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    out.push_back(all[i]);
  }
  return out;
}

pursuit::PursuitData pursuit_data(const data::ConceptDataset& ds, const AnswerState& state,
                                  const std::vector<Mask>& masks,
                                  const std::vector<std::size_t>& indices) {
  pursuit::PursuitData d;
  d.num_queries = ds.num_queries();
  d.num_classes = ds.num_classes();
  d.answers = pick(state.answers, indices);
  d.labels = pick(ds.labels(), indices);
  if (!masks.empty()) {
    d.masks = pick(masks, indices);
  }
  return d;
}

double posterior_auc(const std::vector<std::vector<double>>& posteriors,
                     const std::vector<std::size_t>& labels, std::size_t num_classes) {
  try {
    if (num_classes == 2) {
      std::vector<double> scores;
      std::vector<int> binary;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        scores.push_back(posteriors[i][1]);
        binary.push_back(labels[i] == 1 ? 1 : 0);
      }
      return evalstats::auc(scores, binary);
    }
    return evalstats::multiclass_auc(posteriors, labels).value;
  } catch (const std::domain_error&) {
    return std::nan("");
  }
}

std::optional<double> detection_auc(const std::vector<double>& scores, const std::vector<bool>& correct) {
  try {
    return evalstats::correctness_detection_auc(scores, correct);
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run_seed, std::uint64_t stage) {
  return splitmix64(splitmix64(base ^ 0x9e3779b97f4a7c15ULL) ^ splitmix64(run_seed * 0x100 + stage));
}

const MethodRun& SeedResult::method(const std::string& name) const {
  for (const auto& m : methods) {
    if (m.method == name) {
      return m;
    }
  }
  throw ConfigError("seed result has no method '" + name + "'");
}

data::ConceptDataset load_dataset(const DatasetConfig& config) {
  if (config.source == DatasetSource::kCsv) {
    return data::load_concept_csv(config.csv_path, config.num_classes);
  }
  return data::synth_generate(config.synth.spec, config.synth.samples, config.synth.seed);
}

SeedResult run_seed(const ExperimentConfig& config, const data::ConceptDataset& ds, std::uint64_t seed) {
  config.validate();
  SeedResult result;
  result.seed = seed;
  auto split_spec = config.split;
  split_spec.seed = seed;
  const auto split = data::split(ds, split_spec);
  const auto state = build_answers(config, ds, split, seed);
  const std::size_t n = ds.size();
  const std::size_t m_count = ds.num_queries();

  std::vector<Mask> oracle_masks(n);
  std::vector<std::size_t> wrong(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    oracle_masks[i] = oracle::oracle_mask(state.answers[i], state.truth[i]);
    wrong[i] = static_cast<std::size_t>(std::count(oracle_masks[i].begin(), oracle_masks[i].end(), 1));
  }

  const auto needs = [&](const char* method) {
    return std::find(config.methods.begin(), config.methods.end(), method) != config.methods.end();
  };
  std::vector<Mask> entropy_masks, mc_masks;
  if (state.table) {
    const auto& table = *state.table;
    entropy_masks = uncertainty::entropy_masks(table, config.uncertainty.entropy_threshold).masks;
    std::vector<double> test_entropy, test_score;
    std::vector<bool> test_correct;
    for (std::size_t i : split.test_indices) {
      const auto e = table.entropy_row(i);
      test_entropy.insert(test_entropy.end(), e.begin(), e.end());
      if (table.has_mc) {
        const auto s = table.score_row(i, config.uncertainty.mc_score);
        test_score.insert(test_score.end(), s.begin(), s.end());
      }
      for (std::size_t m = 0; m < m_count; ++m) {
        test_correct.push_back(oracle_masks[i][m] == 0);
      }
    }
    result.entropy_detection_auc = detection_auc(test_entropy, test_correct);
    if (table.has_mc) {
      result.mc_detection_auc = detection_auc(test_score, test_correct);
      double threshold = 0.0;
      if (config.uncertainty.mc_threshold) {
        threshold = *config.uncertainty.mc_threshold;
      } else {
        std::vector<double> u;
        for (std::size_t i : split.val_indices) {
          const auto s = table.score_row(i, config.uncertainty.mc_score);
          u.insert(u.end(), s.begin(), s.end());
        }
        auto incorrect = std::make_unique<bool[]>(u.size());
        std::size_t k = 0;
        for (std::size_t i : split.val_indices) {
          for (std::size_t m = 0; m < m_count; ++m) {
            incorrect[k++] = oracle_masks[i][m] != 0;
          }
        }
        threshold = uncertainty::calibrate_threshold_mc(u, std::span<const bool>(incorrect.get(), u.size()))
                        .threshold;
      }
      result.mc_threshold = threshold;
      mc_masks = uncertainty::mc_masks(table, threshold, config.uncertainty.mc_score).masks;
    } else if (needs("uav_mc")) {
      throw ConfigError("uav_mc needs Monte-Carlo samples but the answer source provided none");
    }
  } else if (needs("uav_entropy") || needs("uav_mc")) {
    throw ConfigError("uncertainty-masked methods need answer probabilities");
  }

  for (std::size_t i : split.test_indices) {
    result.test_ids.push_back(ds[i].id);
    result.error_counts.push_back(wrong[i]);
  }
  const auto test_labels = pick(ds.labels(), split.test_indices);

  auto training = config.training;
  training.seed = derive_seed(config.training.seed, seed, kStageTraining);
  for (const auto& method : config.methods) {
    MethodRun run;
    run.method = method;
    const auto masks = masks_for(method, entropy_masks, mc_masks, oracle_masks);
    const auto train = pursuit_data(ds, state, masks, split.train_indices);
    const auto val = pursuit_data(ds, state, masks, split.val_indices);
    const auto test = pursuit_data(ds, state, masks, split.test_indices);
    std::vector<std::vector<double>> posteriors;
    std::vector<std::size_t> predictions;
    if (method == "cbm") {
      const auto model = pursuit::train_full_concept_baseline(train, val, training);
      for (const auto& a : test.answers) {
        posteriors.push_back(pursuit::full_concept_posterior(model, a));
        predictions.push_back(static_cast<std::size_t>(
            std::max_element(posteriors.back().begin(), posteriors.back().end()) - posteriors.back().begin()));
      }
      run.metrics.mean_queries = static_cast<double>(m_count);
      run.baseline = model;
    } else {
      const auto variant = pursuit::variant_from_string(method);
      auto model = pursuit::train_pursuit(train, val, training, variant);
      if (variant == pursuit::Variant::kUavEntropy) {
        model.mask_threshold = config.uncertainty.entropy_threshold;
      } else if (variant == pursuit::Variant::kUavMc) {
        model.mask_threshold = result.mc_threshold;
        model.mc_score = uncertainty::to_string(config.uncertainty.mc_score);
      }
      auto batch = pursuit::batch_explain(model, result.test_ids, test.answers, test.masks,
                                          test.labels, config.inference);
      for (const auto& t : batch.traces) {
        posteriors.push_back(t.final_posterior());
        predictions.push_back(t.predicted);
      }
      run.metrics.mean_queries = batch.summary.mean_queries;
      run.std_queries = batch.summary.std_queries;
      run.traces = std::move(batch.traces);
      run.model = std::move(model);
    }
    run.metrics.accuracy = 100.0 * evalstats::accuracy(predictions, test_labels);
    run.metrics.auc = 100.0 * posterior_auc(posteriors, test_labels, ds.num_classes());
    run.metrics.macro_f1 = 100.0 * evalstats::macro_f1(predictions, test_labels, ds.num_classes());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      run.correct.push_back(predictions[i] == test_labels[i]);
    }
    run.groups = evalstats::accuracy_by_error_count(run.correct, result.error_counts, config.error_bins);
    result.methods.push_back(std::move(run));
  }
  return result;
}

namespace {

void write_seed_artifacts(const ExperimentConfig& config, const SeedResult& r,
                          const std::filesystem::path& dir) {
  json metrics = json::object();
  metrics["seed"] = r.seed;
  metrics["mc_threshold"] = optional_json(r.mc_threshold);
  metrics["entropy_detection_auc"] = optional_json(r.entropy_detection_auc);
  metrics["mc_detection_auc"] = optional_json(r.mc_detection_auc);
  json methods = json::object();
  for (const auto& m : r.methods) {
    json groups = json::array();
    for (const auto& g : m.groups) {
      groups.push_back({{"group", g.name}, {"n", g.n}, {"accuracy", optional_json(g.accuracy)}});
    }
    methods[m.method] = {{"accuracy", m.metrics.accuracy},
                         {"auc", std::isnan(m.metrics.auc) ? json(nullptr) : json(m.metrics.auc)},
                         {"macro_f1", m.metrics.macro_f1},
                         {"mean_queries", m.metrics.mean_queries},
                         {"std_queries", m.std_queries},
                         {"groups", groups}};
    if (config.save_traces && !m.traces.empty()) {
      std::string lines;
      for (const auto& t : m.traces) {
        lines += trace_line(t);
        lines += '\n';
      }
      detail::write_text(dir / "traces" / (m.method + ".jsonl"), lines);
    }
  }
  metrics["methods"] = methods;
  if (config.save_checkpoints) {
    for (const auto& m : r.methods) {
      const auto path = dir / "checkpoints" / (m.method + ".ckpt");
      if (m.model) {
        save_checkpoint(*m.model, path);
      } else if (m.baseline) {
        save_checkpoint(*m.baseline, path);
      }
    }
  }
  detail::write_text(dir / "metrics.json", metrics.dump(2) + "\n");
}

std::vector<std::pair<std::string, std::vector<evalstats::ErrorGroup>>> pool_groups(
    const ExperimentConfig& config, const std::vector<SeedResult>& seeds) {
  std::vector<std::pair<std::string, std::vector<evalstats::ErrorGroup>>> out;
  for (const auto& method : config.methods) {
    std::vector<bool> correct;
    std::vector<std::size_t> counts;
    for (const auto& s : seeds) {
      const auto& m = s.method(method);
      correct.insert(correct.end(), m.correct.begin(), m.correct.end());
      counts.insert(counts.end(), s.error_counts.begin(), s.error_counts.end());
    }
    out.emplace_back(method, evalstats::accuracy_by_error_count(correct, counts, config.error_bins));
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, bool write_artifacts) {
  config.validate();
  const std::filesystem::path out_dir = config.output_dir;
  if (write_artifacts) {
    std::filesystem::create_directories(out_dir);
    std::filesystem::remove(out_dir / "FAILED");
    json manifest = {{"format", "uavip-experiment"},
                     {"checkpoint_version", kCheckpointVersion},
                     {"config", config_to_json(config)},
                     {"seeds", config.seeds}};
    detail::write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  }
  try {
    const auto ds = load_dataset(config.dataset);
    ExperimentResult result;
    result.seeds.resize(config.seeds.size());

    auto job = [&](std::size_t i) {
      const std::uint64_t seed = config.seeds[i];
      result.seeds[i] = run_seed(config, ds, seed);
      if (write_artifacts) {
        write_seed_artifacts(config, result.seeds[i], out_dir / seed_dir(seed));
      }
    };
    for (std::size_t start = 0; start < config.seeds.size(); start += config.threads) {
      const std::size_t end = std::min(config.seeds.size(), start + config.threads);
      std::vector<std::future<void>> running;
      for (std::size_t i = start + 1; i < end; ++i) {
        running.push_back(std::async(std::launch::async, job, i));
      }
      job(start);
      for (auto& f : running) {
        f.get();
      }
    }

    std::vector<std::pair<std::string, std::vector<evalstats::RunMetrics>>> runs;
    for (const auto& method : config.methods) {
      std::vector<evalstats::RunMetrics> per_seed;
      for (const auto& s : result.seeds) {
        per_seed.push_back(s.method(method).metrics);
      }
      runs.emplace_back(method, std::move(per_seed));
    }
    result.report = evalstats::aggregate_runs(runs, config.reference);
    result.pooled_groups = pool_groups(config, result.seeds);

    if (write_artifacts) {
      detail::write_text(out_dir / "report.csv", evalstats::report_csv(result.report));
      detail::write_text(out_dir / "report.txt", evalstats::report_text(result.report));
      std::ostringstream runs_csv;
      runs_csv << "seed,method,accuracy,auc,macro_f1,mean_queries,std_queries\n";
      std::ostringstream table2;
      table2 << "seed,entropy_auc,mc_auc,mc_threshold\n";
      for (const auto& s : result.seeds) {
        for (const auto& m : s.methods) {
          runs_csv << s.seed << ',' << m.method << ',' << fixed(m.metrics.accuracy, 4) << ','
                   << (std::isnan(m.metrics.auc) ? "" : fixed(m.metrics.auc, 4)) << ','
                   << fixed(m.metrics.macro_f1, 4) << ',' << fixed(m.metrics.mean_queries, 4) << ','
                   << fixed(m.std_queries, 4) << '\n';
        }
        table2 << s.seed << ','
               << (s.entropy_detection_auc ? fixed(100.0 * *s.entropy_detection_auc, 2) : "") << ','
               << (s.mc_detection_auc ? fixed(100.0 * *s.mc_detection_auc, 2) : "") << ','
               << (s.mc_threshold ? detail::format_double(*s.mc_threshold) : "") << '\n';
      }
      detail::write_text(out_dir / "runs.csv", runs_csv.str());
      detail::write_text(out_dir / "table2.csv", table2.str());
      for (const auto& [method, groups] : result.pooled_groups) {
        detail::write_text(out_dir / ("fig2_" + method + ".csv"), evalstats::error_groups_csv(groups));
      }
    }
    return result;
  } catch (const std::exception& e) {
    if (write_artifacts) {
      detail::write_text(out_dir / "FAILED", std::string(e.what()) + "\n");
    }
    throw;
  }
}

}  // namespace uavip::cliserve
