#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavip/pursuit.hpp"

namespace uavip::cliserve {

class SessionNotFound : public std::runtime_error {
 public:
  explicit SessionNotFound(const std::string& id) : std::runtime_error("unknown session '" + id + "'") {}
};

// Answer for a query that is not pending, or for a finished session.
class SessionConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SessionStatus { kActive, kDone };
const char* to_string(SessionStatus s);

enum class UserAnswer { kYes, kNo, kUnsure };
UserAnswer user_answer_from_string(const std::string& text);
const char* to_string(UserAnswer a);

struct SessionEvent {
  std::size_t query = 0;
  UserAnswer answer = UserAnswer::kYes;
};

struct SessionState {
  std::string id;
  double stop_threshold = 0.85;
  std::size_t budget = 0;
  pursuit::History history{0};
  Mask mask;  // queries answered "unsure"
  std::vector<SessionEvent> events;
  pursuit::ExplanationTrace trace;  // steps grow as answers arrive
  std::optional<std::size_t> pending;
  SessionStatus status = SessionStatus::kActive;
  std::string created_at;
  std::string updated_at;

  const std::vector<double>& posterior() const { return trace.final_posterior(); }
};

// In-memory sessions over a shared read-only model. Each session's mutations
// are serialized by its own mutex.
class SessionManager {
 public:
  using Clock = std::function<std::string()>;

  SessionManager(std::shared_ptr<const pursuit::PursuitModel> model,
                 std::vector<std::string> concept_names = {},
                 std::optional<std::filesystem::path> log_path = std::nullopt, Clock clock = {});

  SessionState create(std::optional<double> stop_threshold = std::nullopt,
                      std::optional<std::size_t> budget = std::nullopt);
  SessionState answer(const std::string& id, std::size_t query_index, UserAnswer answer);
  SessionState get(const std::string& id) const;
  void remove(const std::string& id);
  std::size_t size() const;

  const pursuit::PursuitModel& model() const noexcept { return *model_; }
  std::string query_text(std::size_t index) const;

  nlohmann::json query_json(std::optional<std::size_t> index) const;
  nlohmann::json state_json(const SessionState& state) const;

 private:
  struct Entry {
    std::mutex mutex;
    SessionState state;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void advance(SessionState& state) const;
  void log(const nlohmann::json& event);

  std::shared_ptr<const pursuit::PursuitModel> model_;
  std::vector<std::string> concept_names_;
  Clock clock_;
  mutable std::mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_ = 0;
  std::mutex log_mutex_;
  std::optional<std::ofstream> log_;
};

// One label per line; blank lines keep their index with an empty label.
std::vector<std::string> load_concept_names(const std::filesystem::path& path);

}  // namespace uavip::cliserve
