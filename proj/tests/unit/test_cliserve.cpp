#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <thread>

#include "uavip/cliserve/checkpoint.hpp"
#include "uavip/cliserve/config.hpp"
#include "uavip/cliserve/experiment.hpp"
#include "uavip/cliserve/server.hpp"
#include "uavip/cliserve/session.hpp"
#include "uavip/cliserve/trace_json.hpp"
#include "uavip/error.hpp"

using namespace uavip;
using namespace uavip::cliserve;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "uavip_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

pursuit::PursuitData data_of(const data::ConceptDataset& ds) {
  pursuit::PursuitData d;
  d.num_queries = ds.num_queries();
  d.num_classes = ds.num_classes();
  for (const auto& s : ds.samples()) {
    d.answers.push_back(s.answers);
    d.labels.push_back(s.label);
  }
  return d;
}

pursuit::TrainingConfig quick(std::size_t epochs) {
  pursuit::TrainingConfig c;
  c.epochs = epochs;
  c.lr = 3e-3;
  c.batch_size = 16;
  c.hidden = {16, 16};
  c.seed = 3;
  return c;
}

std::shared_ptr<const pursuit::PursuitModel> small_model() {
  static const auto model = [] {
    const auto ds = data::synth_generate(default_joint(2, 6, 1), 200, 1);
    const auto sp = data::split(ds, {0.6, 0.2, 0.2, 1});
    return std::make_shared<const pursuit::PursuitModel>(
        pursuit::train_pursuit(data_of(sp.train), data_of(sp.val), quick(10), pursuit::Variant::kUavMc));
  }();
  return model;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.dataset.synth.spec = default_joint(2, 5, 2);
  c.dataset.synth.samples = 150;
  c.methods = {"vip", "uav_entropy", "uav_mc", "uav_oracle", "cbm"};
  c.training = quick(3);
  c.seeds = {0, 1};
  c.answers.simulator.passes = 8;
  return c;
}

int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(UAVIP_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config: defaults round-trip and strict keys") {
  const ExperimentConfig defaults;
  CHECK(defaults.training.lr == 1e-4);
  CHECK(defaults.training.epochs == 200);
  CHECK(defaults.training.tau_start == 1.0);
  CHECK(defaults.training.tau_end == 0.2);
  CHECK(defaults.uncertainty.entropy_threshold == 0.95);
  CHECK(defaults.inference.stop_threshold == 0.85);
  const auto j = config_to_json(defaults);
  CHECK(config_to_json(config_from_json(j)) == j);

  auto bad = j;
  bad["training"]["learning_rate_typo"] = 1.0;
  try {
    config_from_json(bad);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("training.learning_rate_typo") != std::string::npos);
  }
  bad = j;
  bad["seeds"] = "zero";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = j;
  bad["methods"] = json::array({"vip", "rl"});
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = j;
  bad["uncertainty"]["entropy_threshold"] = 1.5;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
}

TEST_CASE("checkpoint: bit-exact round-trip, truncation, version") {
  const auto model = small_model();
  const auto dir = temp_dir("ckpt");
  save_checkpoint(*model, dir / "m.ckpt");
  const auto back = load_pursuit_checkpoint(dir / "m.ckpt");
  for (std::size_t l = 0; l < model->querier.layers.size(); ++l) {
    CHECK(back.querier.layers[l].weights == model->querier.layers[l].weights);
    CHECK(back.querier.layers[l].bias == model->querier.layers[l].bias);
  }
  for (std::size_t l = 0; l < model->classifier.layers.size(); ++l) {
    CHECK(back.classifier.layers[l].weights == model->classifier.layers[l].weights);
  }
  CHECK(back.variant == model->variant);
  CHECK(back.loss_curve == model->loss_curve);
  CHECK(back.final_val_loss == model->final_val_loss);
  CHECK(back.mask_threshold == model->mask_threshold);
  const AnswerVector a{1, -1, 1, -1, 1, 1};
  CHECK(trace_line(pursuit::infer(back, a, {}, {})) == trace_line(pursuit::infer(*model, a, {}, {})));

  const auto bytes = slurp(dir / "m.ckpt");
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), ParseError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 5)), ParseError);
  auto bumped = bytes;
  bumped[8] = static_cast<char>(kCheckpointVersion + 1);
  try {
    decode_checkpoint(bumped);
    FAIL("expected a version refusal");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(decode_checkpoint(flipped), ParseError);

  CHECK_THROWS_AS(baseline_from_container(decode_checkpoint(bytes)), ConfigError);
}

TEST_CASE("trace json round-trip") {
  const auto model = small_model();
  auto t = pursuit::infer(*model, {1, 0, -1, 1, -1, 1}, Mask{0, 0, 0, 1, 0, 0}, {1.0, std::nullopt});
  t.id = "s7";
  const auto j = trace_to_json(t);
  CHECK(j.contains("steps"));
  CHECK(j.contains("masked"));
  CHECK(j["termination"] == "exhausted");
  const auto back = trace_from_json(j);
  CHECK(trace_line(back) == trace_line(t));
  CHECK(back.steps.size() == t.steps.size());
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    CHECK(back.steps[i].posterior == t.steps[i].posterior);
  }
}

TEST_CASE("sessions replay offline inference exactly") {
  const auto model = small_model();
  SessionManager sessions(model, {}, std::nullopt, [] { return std::string("t"); });
  Rng rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    AnswerVector truth(6);
    for (auto& a : truth) {
      const auto r = rng.uniform_index(5);
      a = r == 0 ? 0 : (r % 2 ? 1 : -1);
    }
    const double theta = rng.uniform(0.6, 1.0);
    auto state = sessions.create(theta);
    std::set<std::size_t> unsure;
    while (state.status == SessionStatus::kActive) {
      REQUIRE(state.pending.has_value());
      const std::size_t q = *state.pending;
      CHECK(unsure.count(q) == 0);
      const Answer a = truth[q];
      const auto reply = a == 0 ? UserAnswer::kUnsure : (a > 0 ? UserAnswer::kYes : UserAnswer::kNo);
      if (a == 0) {
        unsure.insert(q);
      }
      state = sessions.answer(state.id, q, reply);
    }
    const auto offline = pursuit::infer(*model, truth, {}, {theta, std::nullopt});
    REQUIRE(state.trace.steps.size() == offline.steps.size());
    for (std::size_t i = 0; i < offline.steps.size(); ++i) {
      CHECK(state.trace.steps[i].query == offline.steps[i].query);
      CHECK(state.trace.steps[i].posterior == offline.steps[i].posterior);
    }
    CHECK(state.posterior() == offline.final_posterior());
    CHECK_THROWS_AS(sessions.answer(state.id, 0, UserAnswer::kYes), SessionConflict);
    sessions.remove(state.id);
  }
  CHECK(sessions.size() == 0);
  CHECK_THROWS_AS(sessions.get("nope"), SessionNotFound);

  auto all = sessions.create(1.0);
  while (all.status == SessionStatus::kActive) {
    all = sessions.answer(all.id, *all.pending, UserAnswer::kUnsure);
  }
  CHECK(all.trace.steps.empty());
  CHECK(all.posterior() == all.trace.prior);
  CHECK(all.mask == Mask(6, 1));
}

TEST_CASE("HTTP session API") {
  const auto model = small_model();
  SessionManager sessions(model, {"c0", "c1", "c2", "c3", "c4", "c5"});
  httplib::Server server;
  install_routes(server, sessions, {});
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  auto res = client.Post("/sessions", R"({"stop_threshold": 1.0})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  auto body = json::parse(res->body);
  const std::string id = body["session_id"];
  CHECK(body["prior_posterior"].size() == 2);
  const std::size_t first = body["first_query"]["index"];
  CHECK(body["first_query"]["text"] == "c" + std::to_string(first));

  CHECK(client.Get("/sessions/unknown")->status == 404);
  CHECK(client.Post("/sessions/unknown/answer", R"({"query_index":0,"answer":"yes"})",
                    "application/json")->status == 404);
  const std::size_t other = (first + 1) % 6;
  const auto conflict = client.Post("/sessions/" + id + "/answer",
                                    json{{"query_index", other}, {"answer", "yes"}}.dump(),
                                    "application/json");
  CHECK(conflict->status == 409);
  CHECK(json::parse(conflict->body).contains("error"));
  CHECK(client.Post("/sessions/" + id + "/answer", R"({"query_index":0,"answer":"maybe"})",
                    "application/json")->status == 400);
  CHECK(client.Post("/sessions/" + id + "/answer", "not json", "application/json")->status == 400);

  std::size_t pending = first;
  std::string status = "active";
  int steps = 0;
  while (status == "active") {
    res = client.Post("/sessions/" + id + "/answer",
                      json{{"query_index", pending}, {"answer", pending == first ? "unsure" : "yes"}}.dump(),
                      "application/json");
    REQUIRE(res->status == 200);
    body = json::parse(res->body);
    status = body["status"];
    if (!body["next_query"].is_null()) {
      pending = body["next_query"]["index"];
      CHECK(pending != first);
    }
    ++steps;
  }
  CHECK(steps == 6);
  const auto full = json::parse(client.Get("/sessions/" + id)->body);
  CHECK(full["status"] == "done");
  CHECK(full["history"].size() == 5);
  CHECK(full["skipped"].size() == 1);
  CHECK(full["skipped"][0]["index"] == first);
  CHECK(client.Delete("/sessions/" + id)->status < 300);
  CHECK(client.Get("/sessions/" + id)->status == 404);

  server.stop();
  worker.join();
}

TEST_CASE("experiment runs are deterministic and write artifacts") {
  auto cfg = tiny_experiment();
  const auto a = run_experiment(cfg, false);
  const auto b = run_experiment(cfg, false);
  REQUIRE(a.seeds.size() == 2);
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      CHECK(a.seeds[s].methods[m].metrics.accuracy == b.seeds[s].methods[m].metrics.accuracy);
      CHECK(a.seeds[s].methods[m].metrics.mean_queries == b.seeds[s].methods[m].metrics.mean_queries);
    }
  }
  CHECK(a.seeds[0].method("cbm").metrics.mean_queries == 5.0);
  CHECK(evalstats::report_csv(a.report) == evalstats::report_csv(b.report));

  const auto dir = temp_dir("experiment");
  cfg.output_dir = dir.string();
  cfg.threads = 2;
  const auto c = run_experiment(cfg, true);
  CHECK(evalstats::report_csv(c.report) == evalstats::report_csv(a.report));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "report.csv"));
  CHECK(fs::exists(dir / "report.txt"));
  CHECK(fs::exists(dir / "seed_0" / "traces" / "uav_mc.jsonl"));
  CHECK(fs::exists(dir / "seed_1" / "checkpoints" / "vip.ckpt"));
  CHECK(fs::exists(dir / "fig2_uav_oracle.csv"));
  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(config_from_json(manifest["config"]).seeds == cfg.seeds);
}

TEST_CASE("command-line interface") {
  const auto dir = temp_dir("cli");
  const auto out = dir / "out.txt";
  const std::string data = (dir / "d.csv").string();
  const std::string ckpt = (dir / "m.ckpt").string();
  CHECK(run_cli("synth-gen --out " + data + " --queries 5 --samples 200 --seed 3", out) == 0);
  CHECK(run_cli("train-pursuit --data " + data + " --out " + ckpt + " --epochs 3", out) == 0);

  CHECK(run_cli("explain --checkpoint " + ckpt + " --data " + data + " --id s4", dir / "e1.txt") == 0);
  CHECK(run_cli("explain --checkpoint " + ckpt + " --data " + data + " --id s4", dir / "e2.txt") == 0);
  CHECK(slurp(dir / "e1.txt") == slurp(dir / "e2.txt"));
  const auto model = load_pursuit_checkpoint(ckpt);
  const auto ds = data::load_concept_csv(data);
  auto trace = pursuit::infer(model, ds[*ds.find("s4")].answers, {}, {});
  trace.id = "s4";
  CHECK(json::parse(slurp(dir / "e1.txt")) == trace_to_json(trace));

  CHECK(run_cli("explain --checkpoint " + ckpt + " --data " + data + " --id s4 --mask 0,1,2,3,4",
                dir / "e3.txt") == 0);
  CHECK(json::parse(slurp(dir / "e3.txt"))["steps"].empty());

  CHECK(run_cli("explain --checkpoint " + ckpt + " --data " + data + " --id nope", out) == 2);
  CHECK(run_cli("train-pursuit --data " + data + " --out " + ckpt + " --variant rl", out) == 2);
  CHECK(run_cli("no-such-command", out) == 2);
  std::ofstream(dir / "bad.json") << R"({"trainig": {}})";
  CHECK(run_cli("run-experiment " + (dir / "bad.json").string(), out) == 2);
  CHECK(slurp(out).find("trainig") != std::string::npos);
  std::ofstream(dir / "junk.ckpt") << "garbage";
  CHECK(run_cli("explain --checkpoint " + (dir / "junk.ckpt").string() + " --data " + data + " --id s4",
                out) == 2);

  CHECK(run_cli("print-default-config", dir / "default.json") == 0);
  auto cfg = json::parse(slurp(dir / "default.json"));
  cfg["seeds"] = json::array({0});
  cfg["methods"] = json::array({"vip", "cbm"});
  cfg["training"]["epochs"] = 2;
  cfg["dataset"]["synth"]["samples"] = 100;
  cfg["output_dir"] = (dir / "run").string();
  std::ofstream(dir / "min.json") << cfg.dump();
  CHECK(run_cli("run-experiment " + (dir / "min.json").string(), out) == 0);
  CHECK(fs::exists(dir / "run" / "report.csv"));
}
