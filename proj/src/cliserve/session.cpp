#include "uavip/cliserve/session.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <random>

#include "text_io.hpp"
#include "uavip/error.hpp"
#include "uavip/rng.hpp"

namespace uavip::cliserve {

using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const char* to_string(SessionStatus s) { return s == SessionStatus::kActive ? "active" : "done"; }

UserAnswer user_answer_from_string(const std::string& text) {
  if (text == "yes") {
    return UserAnswer::kYes;
  }
  if (text == "no") {
    return UserAnswer::kNo;
  }
  if (text == "unsure") {
    return UserAnswer::kUnsure;
  }
  throw ConfigError("answer must be \"yes\", \"no\" or \"unsure\"");
}

const char* to_string(UserAnswer a) {
  switch (a) {
    case UserAnswer::kYes: return "yes";
    case UserAnswer::kNo: return "no";
    case UserAnswer::kUnsure: return "unsure";
  }
  return "?";
}

std::vector<std::string> load_concept_names(const std::filesystem::path& path) {
  return detail::read_lines(path);
}

SessionManager::SessionManager(std::shared_ptr<const pursuit::PursuitModel> model,
                               std::vector<std::string> concept_names,
                               std::optional<std::filesystem::path> log_path, Clock clock)
    : model_(std::move(model)), concept_names_(std::move(concept_names)), clock_(std::move(clock)) {
  if (!model_) {
    throw ConfigError("session manager needs a model");
  }
  model_->validate();
  if (!concept_names_.empty() && concept_names_.size() != model_->num_queries) {
    throw ConfigError("concept names list " + std::to_string(concept_names_.size()) +
                      " labels but the model has " + std::to_string(model_->num_queries) +
                      " queries");
  }
  if (!clock_) {
    clock_ = utc_now;
  }
  salt_ = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
  if (log_path) {
    if (log_path->has_parent_path()) {
      std::filesystem::create_directories(log_path->parent_path());
    }
    log_.emplace(*log_path, std::ios::app);
    if (!*log_) {
      throw ConfigError("cannot open session log " + log_path->string());
    }
  }
}

std::string SessionManager::query_text(std::size_t index) const {
  if (index < concept_names_.size() && !concept_names_[index].empty()) {
    return concept_names_[index];
  }
  return "query " + std::to_string(index);
}

json SessionManager::query_json(std::optional<std::size_t> index) const {
  if (!index) {
    return nullptr;
  }
  return {{"index", *index}, {"text", query_text(*index)}};
}

// Same loop as pursuit::infer, paused whenever a query awaits its answer.
void SessionManager::advance(SessionState& s) const {
  s.pending.reset();
  const auto& current = s.posterior();
  if (*std::max_element(current.begin(), current.end()) >= s.stop_threshold) {
    s.trace.termination = pursuit::Termination::kConfidence;
  } else if (s.history.size() >= s.budget) {
    s.trace.termination = pursuit::Termination::kExhausted;
  } else if (auto q = pursuit::next_query(*model_, s.history, s.mask)) {
    s.pending = *q;
    return;
  } else {
    s.trace.termination = pursuit::Termination::kExhausted;
  }
  s.status = SessionStatus::kDone;
  s.trace.masked.clear();
  for (std::size_t m = 0; m < s.mask.size(); ++m) {
    if (s.mask[m] != 0) {
      s.trace.masked.push_back(m);
    }
  }
  const auto& final = s.trace.final_posterior();
  s.trace.predicted = static_cast<std::size_t>(std::max_element(final.begin(), final.end()) - final.begin());
  s.trace.confidence = final[s.trace.predicted];
}

SessionState SessionManager::create(std::optional<double> stop_threshold,
                                    std::optional<std::size_t> budget) {
  const std::size_t m_count = model_->num_queries;
  const double threshold = stop_threshold.value_or(0.85);
  if (!(threshold > 1.0 / static_cast<double>(model_->num_classes) && threshold <= 1.0)) {
    throw ConfigError("stop_threshold must lie in (1/K, 1]");
  }
  if (budget && *budget > m_count) {
    throw ConfigError("budget exceeds the number of queries");
  }
  auto entry = std::make_shared<Entry>();
  SessionState& s = entry->state;
  s.stop_threshold = threshold;
  s.budget = budget.value_or(m_count);
  s.history = pursuit::History(m_count);
  s.mask.assign(m_count, 0);
  s.trace.prior = pursuit::posterior(*model_, s.history);
  s.created_at = s.updated_at = clock_();
  {
    std::lock_guard lock(map_mutex_);
    // splitmix64 is a bijection, so ids never repeat within a manager.
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(splitmix64(salt_ ^ ++counter_)));
    s.id = buf;
    s.trace.id = s.id;
    advance(s);
    sessions_[s.id] = entry;
  }
  log({{"event", "create"}, {"session_id", s.id}, {"stop_threshold", s.stop_threshold},
       {"budget", s.budget}, {"at", s.created_at}});
  return s;
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw SessionNotFound(id);
  }
  return it->second;
}

SessionState SessionManager::answer(const std::string& id, std::size_t query_index, UserAnswer answer) {
  const auto entry = find(id);
  SessionState copy;
  {
    std::lock_guard lock(entry->mutex);
    SessionState& s = entry->state;
    if (s.status == SessionStatus::kDone) {
      throw SessionConflict("session '" + id + "' is finished");
    }
    if (!s.pending || *s.pending != query_index) {
      throw SessionConflict("query " + std::to_string(query_index) +
                            " is not pending (pending: " +
                            (s.pending ? std::to_string(*s.pending) : std::string("none")) + ")");
    }
    s.events.push_back({query_index, answer});
    if (answer == UserAnswer::kUnsure) {
      s.mask[query_index] = 1;
    } else {
      const Answer a = answer == UserAnswer::kYes ? Answer{1} : Answer{-1};
      s.history.record(query_index, a);
      s.trace.steps.push_back({query_index, a, pursuit::posterior(*model_, s.history)});
    }
    s.updated_at = clock_();
    advance(s);
    copy = s;
  }
  log({{"event", "answer"}, {"session_id", id}, {"query_index", query_index},
       {"answer", to_string(answer)}, {"status", to_string(copy.status)}, {"at", copy.updated_at}});
  return copy;
}

SessionState SessionManager::get(const std::string& id) const {
  const auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->state;
}

void SessionManager::remove(const std::string& id) {
  {
    std::lock_guard lock(map_mutex_);
    if (sessions_.erase(id) == 0) {
      throw SessionNotFound(id);
    }
  }
  log({{"event", "delete"}, {"session_id", id}, {"at", clock_()}});
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(map_mutex_);
  return sessions_.size();
}

void SessionManager::log(const json& event) {
  if (!log_) {
    return;
  }
  std::lock_guard lock(log_mutex_);
  *log_ << event.dump() << '\n';
  log_->flush();
}

json SessionManager::state_json(const SessionState& s) const {
  json history = json::array();
  for (const auto& step : s.trace.steps) {
    history.push_back({{"query", step.query},
                       {"text", query_text(step.query)},
                       {"answer", step.answer > 0 ? "yes" : "no"},
                       {"posterior", step.posterior}});
  }
  json skipped = json::array();
  for (std::size_t m = 0; m < s.mask.size(); ++m) {
    if (s.mask[m] != 0) {
      skipped.push_back({{"index", m}, {"text", query_text(m)}});
    }
  }
  json events = json::array();
  for (const auto& e : s.events) {
    events.push_back({{"query", e.query}, {"answer", to_string(e.answer)}});
  }
  json out = {{"session_id", s.id},
              {"status", to_string(s.status)},
              {"stop_threshold", s.stop_threshold},
              {"budget", s.budget},
              {"prior_posterior", s.trace.prior},
              {"posterior", s.posterior()},
              {"history", history},
              {"skipped", skipped},
              {"events", events},
              {"pending_query", query_json(s.pending)},
              {"created_at", s.created_at},
              {"updated_at", s.updated_at}};
  if (s.status == SessionStatus::kDone) {
    out["termination"] = pursuit::to_string(s.trace.termination);
    out["predicted"] = s.trace.predicted;
    out["confidence"] = s.trace.confidence;
  }
  return out;
}

}  // namespace uavip::cliserve
