// uavip: command-line front end for the UAV-IP pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavip/cliserve/checkpoint.hpp"
#include "uavip/cliserve/config.hpp"
#include "uavip/cliserve/experiment.hpp"
#include "uavip/cliserve/server.hpp"
#include "uavip/cliserve/session.hpp"
#include "uavip/cliserve/trace_json.hpp"
#include "uavip/concepts.hpp"
#include "uavip/data.hpp"
#include "uavip/error.hpp"
#include "uavip/evalstats.hpp"
#include "uavip/oracle.hpp"
#include "uavip/pursuit.hpp"
#include "uavip/uncertainty.hpp"

namespace {

using namespace uavip;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open " + path);
  }
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError(path + " is not valid JSON");
  }
  return j;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    throw std::runtime_error("cannot write " + path);
  }
}

std::vector<std::string> ids_of(const data::ConceptDataset& ds) {
  std::vector<std::string> ids;
  for (const auto& s : ds.samples()) {
    ids.push_back(s.id);
  }
  return ids;
}

// Answers the models see plus the masks for one mask source.
struct Resolved {
  std::vector<AnswerVector> answers;
  std::vector<Mask> masks;
  std::optional<double> threshold;
};

struct MaskOptions {
  std::string probs_path;
  std::string source = "none";  // none | entropy | mc | oracle
  std::optional<double> threshold;
  std::string mc_score = "total";
};

Resolved resolve(const data::ConceptDataset& ds, const MaskOptions& opt,
                 const std::vector<std::size_t>* calibration_rows = nullptr) {
  Resolved r;
  const auto truth = ds.answers();
  std::optional<uncertainty::UncertaintyTable> table;
  if (!opt.probs_path.empty()) {
    const auto sets = concepts::select_ids(concepts::import_probabilities(opt.probs_path), ids_of(ds));
    r.answers = sets.distributions.predicted_answers();
    table = uncertainty::estimate(sets);
  } else {
    r.answers = truth;
  }
  if (opt.source == "none") {
    return r;
  }
  if (opt.source == "oracle") {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      r.masks.push_back(oracle::oracle_mask(r.answers[i], truth[i]));
    }
    return r;
  }
  if (!table) {
    throw ConfigError("mask source '" + opt.source + "' needs --probs");
  }
  if (opt.source == "entropy") {
    r.threshold = opt.threshold.value_or(0.95);
    r.masks = uncertainty::entropy_masks(*table, *r.threshold).masks;
    return r;
  }
  if (opt.source != "mc") {
    throw ConfigError("mask source must be none, entropy, mc or oracle");
  }
  if (!table->has_mc) {
    throw ConfigError("mask source 'mc' needs Monte-Carlo samples in the probability file");
  }
  const auto score = uncertainty::mc_score_from_string(opt.mc_score);
  if (opt.threshold) {
    r.threshold = opt.threshold;
  } else {
    if (calibration_rows == nullptr) {
      throw ConfigError("mask source 'mc' needs --threshold here (calibrate first)");
    }
    std::vector<double> u;
    std::vector<char> wrong;
    for (std::size_t i : *calibration_rows) {
      const auto row = table->score_row(i, score);
      u.insert(u.end(), row.begin(), row.end());
      for (std::size_t m = 0; m < ds.num_queries(); ++m) {
        wrong.push_back(r.answers[i][m] != truth[i][m]);
      }
    }
    auto flags = std::make_unique<bool[]>(wrong.size());
    for (std::size_t k = 0; k < wrong.size(); ++k) {
      flags[k] = wrong[k] != 0;
    }
    r.threshold = uncertainty::calibrate_threshold_mc(u, std::span<const bool>(flags.get(), wrong.size())).threshold;
  }
  r.masks = uncertainty::mc_masks(*table, *r.threshold, score).masks;
  return r;
}

pursuit::PursuitData make_data(const data::ConceptDataset& ds, const Resolved& r,
                               const std::vector<std::size_t>& rows) {
  pursuit::PursuitData d;
  d.num_queries = ds.num_queries();
  d.num_classes = ds.num_classes();
  const auto labels = ds.labels();
  for (std::size_t i : rows) {
    d.answers.push_back(r.answers[i]);
    d.labels.push_back(labels[i]);
    if (!r.masks.empty()) {
      d.masks.push_back(r.masks[i]);
    }
  }
  return d;
}

std::vector<std::size_t> all_rows(const data::ConceptDataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = i;
  }
  return rows;
}

void add_mask_options(CLI::App* cmd, MaskOptions& opt) {
  cmd->add_option("--probs", opt.probs_path, "Probability file; answers become round(p)");
  cmd->add_option("--mask-source", opt.source, "none | entropy | mc | oracle")
      ->check(CLI::IsMember({"none", "entropy", "mc", "oracle"}));
  cmd->add_option("--threshold", opt.threshold, "Mask threshold (entropy default 0.95)");
  cmd->add_option("--mc-score", opt.mc_score, "total | aleatoric | epistemic")
      ->check(CLI::IsMember({"total", "aleatoric", "epistemic"}));
}

std::string mask_source_for(pursuit::Variant v) {
  switch (v) {
    case pursuit::Variant::kVip: return "none";
    case pursuit::Variant::kUavEntropy: return "entropy";
    case pursuit::Variant::kUavMc: return "mc";
    case pursuit::Variant::kUavOracle: return "oracle";
  }
  return "none";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware variational information pursuit"};
  app.require_subcommand(1);

  // synth-gen
  auto* synth = app.add_subcommand("synth-gen", "Generate a synthetic concept dataset");
  std::string synth_out, synth_joint;
  std::size_t synth_k = 2, synth_m = 8, synth_n = 1000;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "Dataset CSV")->required();
  synth->add_option("--joint", synth_joint, "Joint spec JSON");
  synth->add_option("--classes", synth_k, "K");
  synth->add_option("--queries", synth_m, "M");
  synth->add_option("--samples", synth_n, "Sample count");
  synth->add_option("--seed", synth_seed, "Seed");

  // train-concepts
  auto* tc = app.add_subcommand("train-concepts", "Train the concept predictor on features");
  std::string tc_data, tc_out, tc_predict, tc_probs_out;
  std::size_t tc_mc = 0;
  concepts::ConceptModelConfig tc_cfg;
  tc->add_option("--data", tc_data, "Training dataset CSV")->required();
  tc->add_option("--out", tc_out, "Checkpoint path")->required();
  tc->add_option("--epochs", tc_cfg.epochs);
  tc->add_option("--lr", tc_cfg.lr);
  tc->add_option("--batch-size", tc_cfg.batch_size);
  tc->add_option("--dropout", tc_cfg.dropout);
  tc->add_option("--seed", tc_cfg.seed);
  tc->add_option("--predict", tc_predict, "Dataset CSV to predict after training");
  tc->add_option("--probs-out", tc_probs_out, "Probability file for --predict");
  tc->add_option("--mc-samples", tc_mc, "Monte-Carlo passes (0 = none)");

  // simulate-answers
  auto* sim = app.add_subcommand("simulate-answers", "Simulated probabilistic answers");
  std::string sim_data, sim_out, sim_config;
  concepts::SimulatorConfig sim_cfg;
  sim->add_option("--data", sim_data, "Dataset CSV")->required();
  sim->add_option("--out", sim_out, "Probability file")->required();
  sim->add_option("--config", sim_config, "Simulator JSON");
  sim->add_option("--accuracy", sim_cfg.accuracy);
  sim->add_option("--ambiguity", sim_cfg.ambiguity);
  sim->add_option("--passes", sim_cfg.passes);
  sim->add_option("--seed", sim_cfg.seed);

  // uncertainty
  auto* unc = app.add_subcommand("uncertainty", "Per-query uncertainty and masks");
  std::string unc_probs, unc_out, unc_measure = "entropy", unc_score = "total";
  std::optional<double> unc_threshold;
  unc->add_option("--probs", unc_probs, "Probability file")->required();
  unc->add_option("--out", unc_out, "Uncertainty dump CSV")->required();
  unc->add_option("--measure", unc_measure, "entropy | mc")->check(CLI::IsMember({"entropy", "mc"}));
  unc->add_option("--threshold", unc_threshold, "Mask threshold");
  unc->add_option("--mc-score", unc_score)->check(CLI::IsMember({"total", "aleatoric", "epistemic"}));

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit the Monte-Carlo mask threshold");
  std::string cal_probs, cal_data, cal_score = "total", cal_out;
  cal->add_option("--probs", cal_probs, "Probability file with MC samples")->required();
  cal->add_option("--data", cal_data, "Dataset CSV with reference answers")->required();
  cal->add_option("--mc-score", cal_score)->check(CLI::IsMember({"total", "aleatoric", "epistemic"}));
  cal->add_option("--out", cal_out, "Write the result JSON here as well");

  // train-pursuit
  auto* tp = app.add_subcommand("train-pursuit", "Train a querier/classifier pair");
  std::string tp_data, tp_out, tp_variant = "vip", tp_training;
  MaskOptions tp_mask;
  pursuit::TrainingConfig tp_cfg;
  data::SplitSpec tp_split;
  tp->add_option("--data", tp_data, "Dataset CSV")->required();
  tp->add_option("--out", tp_out, "Checkpoint path")->required();
  tp->add_option("--variant", tp_variant, "vip | uav_entropy | uav_mc | uav_oracle")
      ->check(CLI::IsMember({"vip", "uav_entropy", "uav_mc", "uav_oracle"}));
  tp->add_option("--training", tp_training, "Training JSON");
  tp->add_option("--epochs", tp_cfg.epochs);
  tp->add_option("--lr", tp_cfg.lr);
  tp->add_option("--batch-size", tp_cfg.batch_size);
  tp->add_option("--seed", tp_cfg.seed);
  tp->add_option("--split-seed", tp_split.seed);
  tp->add_option("--probs", tp_mask.probs_path, "Probability file; answers become round(p)");
  tp->add_option("--threshold", tp_mask.threshold, "Mask threshold (mc: calibrated on val when absent)");
  tp->add_option("--mc-score", tp_mask.mc_score)->check(CLI::IsMember({"total", "aleatoric", "epistemic"}));

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Sequential inference over a dataset");
  std::string ev_ckpt, ev_data, ev_traces;
  MaskOptions ev_mask;
  double ev_stop = 0.85;
  std::optional<std::size_t> ev_budget;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data, "Dataset CSV")->required();
  add_mask_options(ev, ev_mask);
  ev->add_option("--stop-threshold", ev_stop);
  ev->add_option("--budget", ev_budget);
  ev->add_option("--traces-out", ev_traces, "Trace JSON lines");

  // run-experiment
  auto* rx = app.add_subcommand("run-experiment", "Full multi-seed protocol");
  std::string rx_config, rx_out;
  rx->add_option("config", rx_config, "Experiment config JSON")->required();
  rx->add_option("--output-dir", rx_out, "Override output_dir");

  // explain
  auto* ex = app.add_subcommand("explain", "Explanation trace for one sample");
  std::string ex_ckpt, ex_data, ex_id;
  MaskOptions ex_mask;
  std::vector<std::size_t> ex_masked;
  double ex_stop = 0.85;
  std::optional<std::size_t> ex_budget;
  ex->add_option("--checkpoint", ex_ckpt)->required();
  ex->add_option("--data", ex_data, "Dataset CSV")->required();
  ex->add_option("--id", ex_id, "Sample id")->required();
  add_mask_options(ex, ex_mask);
  ex->add_option("--mask", ex_masked, "Extra masked query indices")->delimiter(',');
  ex->add_option("--stop-threshold", ex_stop);
  ex->add_option("--budget", ex_budget);

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP session API");
  std::string sv_ckpt, sv_concepts, sv_static, sv_log;
  cliserve::ServerOptions sv_opts;
  sv->add_option("--checkpoint", sv_ckpt)->required();
  sv->add_option("--host", sv_opts.host);
  sv->add_option("--port", sv_opts.port);
  sv->add_option("--concepts", sv_concepts, "concepts.txt (one label per line)");
  sv->add_option("--static-dir", sv_static, "Directory served at /");
  sv->add_option("--log", sv_log, "Append-only session log (JSON lines)");

  auto* pdc = app.add_subcommand("print-default-config", "Print the default experiment config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) {
      data::JointSpec spec = synth_joint.empty()
                                 ? cliserve::default_joint(synth_k, synth_m, synth_seed)
                                 : cliserve::joint_spec_from_json(read_json_file(synth_joint), "joint");
      data::save_concept_csv(data::synth_generate(spec, synth_n, synth_seed), synth_out);
    } else if (*tc) {
      const auto ds = data::load_concept_csv(tc_data);
      const auto model = concepts::train_concept_model(ds, tc_cfg);
      cliserve::save_checkpoint(model, tc_out);
      if (!tc_predict.empty()) {
        if (tc_probs_out.empty()) {
          throw ConfigError("--predict needs --probs-out");
        }
        const auto target = data::load_concept_csv(tc_predict);
        concepts::ProbabilitySets sets{concepts::predict_distributions(model, target), std::nullopt};
        if (tc_mc > 0) {
          sets.mc = concepts::mc_sample_distributions(model, target, tc_mc, tc_cfg.seed);
        }
        concepts::export_probabilities(sets, tc_probs_out);
      }
    } else if (*sim) {
      auto cfg = sim_cfg;
      if (!sim_config.empty()) {
        cfg = cliserve::simulator_from_json(read_json_file(sim_config), "simulator");
      }
      const auto ds = data::load_concept_csv(sim_data);
      auto out = concepts::simulate_answers(ds, cfg);
      concepts::export_probabilities({std::move(out.distributions), std::move(out.mc)}, sim_out);
    } else if (*unc) {
      const auto table = uncertainty::estimate(concepts::import_probabilities(unc_probs));
      std::optional<uncertainty::UncertaintyMasks> masks;
      if (unc_measure == "entropy") {
        masks = uncertainty::entropy_masks(table, unc_threshold.value_or(0.95));
      } else if (unc_threshold) {
        if (!table.has_mc) {
          throw ConfigError("--measure mc needs Monte-Carlo samples in the probability file");
        }
        masks = uncertainty::mc_masks(table, *unc_threshold, uncertainty::mc_score_from_string(unc_score));
      }
      uncertainty::save_uncertainty_dump(table, masks ? &masks->masks : nullptr, unc_out);
    } else if (*cal) {
      const auto ds = data::load_concept_csv(cal_data);
      const auto rows = all_rows(ds);
      const auto sets = concepts::select_ids(concepts::import_probabilities(cal_probs), ids_of(ds));
      const auto table = uncertainty::estimate(sets);
      if (!table.has_mc) {
        throw ConfigError("calibration needs Monte-Carlo samples in the probability file");
      }
      const auto predicted = sets.distributions.predicted_answers();
      const auto truth = ds.answers();
      std::vector<double> u;
      std::vector<char> wrong;
      for (std::size_t i : rows) {
        const auto row = table.score_row(i, uncertainty::mc_score_from_string(cal_score));
        u.insert(u.end(), row.begin(), row.end());
        for (std::size_t m = 0; m < ds.num_queries(); ++m) {
          wrong.push_back(predicted[i][m] != truth[i][m]);
        }
      }
      auto flags = std::make_unique<bool[]>(wrong.size());
      for (std::size_t k = 0; k < wrong.size(); ++k) {
        flags[k] = wrong[k] != 0;
      }
      const auto c = uncertainty::calibrate_threshold_mc(u, std::span<const bool>(flags.get(), wrong.size()));
      json out = {{"threshold", c.threshold},
                  {"balanced_accuracy", c.balanced_accuracy},
                  {"mc_score", cal_score},
                  {"warning", c.warning ? json(*c.warning) : json(nullptr)}};
      std::cout << out.dump(2) << '\n';
      if (!cal_out.empty()) {
        write_file(cal_out, out.dump(2) + "\n");
      }
    } else if (*tp) {
      auto cfg = tp_cfg;
      if (!tp_training.empty()) {
        cfg = cliserve::training_from_json(read_json_file(tp_training), "training");
      }
      const auto variant = pursuit::variant_from_string(tp_variant);
      const auto ds = data::load_concept_csv(tp_data);
      const auto split = data::split(ds, tp_split);
      tp_mask.source = mask_source_for(variant);
      const auto r = resolve(ds, tp_mask, &split.val_indices);
      auto model = pursuit::train_pursuit(make_data(ds, r, split.train_indices),
                                          make_data(ds, r, split.val_indices), cfg, variant);
      model.mask_threshold = r.threshold;
      model.mc_score = tp_mask.mc_score;
      cliserve::save_checkpoint(model, tp_out);
      std::cout << json{{"final_val_loss", model.final_val_loss},
                        {"mask_threshold", r.threshold ? json(*r.threshold) : json(nullptr)}}
                       .dump()
                << '\n';
    } else if (*ev) {
      const auto model = cliserve::load_pursuit_checkpoint(ev_ckpt);
      const auto ds = data::load_concept_csv(ev_data, model.num_classes);
      if (ev_mask.source == "mc" && !ev_mask.threshold) {
        ev_mask.threshold = model.mask_threshold;
      }
      const auto r = resolve(ds, ev_mask);
      const auto batch = pursuit::batch_explain(model, ids_of(ds), r.answers, r.masks, ds.labels(),
                                                {ev_stop, ev_budget});
      std::vector<std::size_t> predictions;
      std::vector<std::vector<double>> posteriors;
      std::string lines;
      for (const auto& t : batch.traces) {
        predictions.push_back(t.predicted);
        posteriors.push_back(t.final_posterior());
        lines += cliserve::trace_line(t) + "\n";
      }
      if (!ev_traces.empty()) {
        write_file(ev_traces, lines);
      }
      const auto labels = ds.labels();
      json out = {{"count", batch.summary.count},
                  {"accuracy", 100.0 * batch.summary.accuracy},
                  {"macro_f1", 100.0 * evalstats::macro_f1(predictions, labels, ds.num_classes())},
                  {"mean_queries", batch.summary.mean_queries},
                  {"std_queries", batch.summary.std_queries}};
      try {
        out["auc"] = 100.0 * evalstats::multiclass_auc(posteriors, labels).value;
      } catch (const std::domain_error&) {
        out["auc"] = nullptr;
      }
      std::cout << out.dump(2) << '\n';
    } else if (*rx) {
      auto cfg = cliserve::load_config(rx_config);
      if (!rx_out.empty()) {
        cfg.output_dir = rx_out;
      }
      const auto result = cliserve::run_experiment(cfg);
      std::cout << evalstats::report_text(result.report);
    } else if (*ex) {
      const auto model = cliserve::load_pursuit_checkpoint(ex_ckpt);
      const auto ds = data::load_concept_csv(ex_data, model.num_classes);
      const auto row = ds.find(ex_id);
      if (!row) {
        throw ConfigError("unknown sample id '" + ex_id + "'");
      }
      if (ex_mask.source == "mc" && !ex_mask.threshold) {
        ex_mask.threshold = model.mask_threshold;
      }
      const auto r = resolve(ds, ex_mask);
      Mask mask = r.masks.empty() ? Mask(model.num_queries, 0) : r.masks[*row];
      for (std::size_t m : ex_masked) {
        if (m >= model.num_queries) {
          throw ConfigError("--mask index " + std::to_string(m) + " is out of range");
        }
        mask[m] = 1;
      }
      auto trace = pursuit::infer(model, r.answers[*row], mask, {ex_stop, ex_budget});
      trace.id = ex_id;
      std::cout << cliserve::trace_to_json(trace).dump(2) << '\n';
    } else if (*sv) {
      auto model = std::make_shared<const pursuit::PursuitModel>(cliserve::load_pursuit_checkpoint(sv_ckpt));
      std::vector<std::string> names;
      if (!sv_concepts.empty()) {
        names = cliserve::load_concept_names(sv_concepts);
      }
      if (!sv_static.empty()) {
        sv_opts.static_dir = sv_static;
      }
      cliserve::SessionManager sessions(model, names,
                                        sv_log.empty() ? std::nullopt
                                                       : std::optional<std::filesystem::path>(sv_log));
      std::cerr << "serving on http://" << sv_opts.host << ':' << sv_opts.port << '\n';
      cliserve::serve(sessions, sv_opts);
    } else if (*pdc) {
      std::cout << cliserve::config_to_json(cliserve::ExperimentConfig{}).dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
