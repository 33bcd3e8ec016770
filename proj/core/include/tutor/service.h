#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutor/orchestrator.h"
#include "tutor/scenarios.h"

namespace tutor {

struct SessionDescriptor {
  std::string session_id;
  PolicyKind policy = PolicyKind::kEs;
  std::optional<std::string> scenario_id;
  std::string skill_id;
  std::vector<std::string> problem_ids;
  std::string created_at;  // ISO-8601 UTC
};

struct CreateSessionRequest {
  PolicyKind policy = PolicyKind::kEs;
  std::optional<std::string> scenario_id;
  std::optional<std::string> skill_id;
};

// Session runtime behind the HTTP API. Each session lives in
// <data_dir>/<id>.session.json (descriptor) and <id>.jsonl (append-only
// traces). Turns on one session are serialized; different sessions run
// independently.
class TutorService {
 public:
  TutorService(std::shared_ptr<const Orchestrator> es, std::shared_ptr<const Orchestrator> baseline,
               std::shared_ptr<const ScenarioStore> scenarios, std::filesystem::path data_dir);

  // {session_id, policy, scenario_id, skill_id, problem}
  nlohmann::json create_session(const CreateSessionRequest& req);
  // {message, badges, constraint_checks, trace_id, turn_index, problem?, session_complete}
  nlohmann::json submit_turn(const std::string& session_id, const StudentInput& input);
  std::vector<TurnTrace> get_traces(const std::string& session_id);
  nlohmann::json list_scenarios() const;

  // Rebuilds sessions from the data directory (after a restart). Returns how many were loaded.
  std::size_t recover();

  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  struct Session {
    std::mutex mu;
    SessionDescriptor descriptor;
    SessionState state;
    std::unique_ptr<JsonlTraceSink> sink;
  };

  std::shared_ptr<Session> find(const std::string& session_id);
  const Orchestrator& orchestrator(PolicyKind p) const { return p == PolicyKind::kEs ? *es_ : *baseline_; }
  std::filesystem::path trace_path(const std::string& id) const { return data_dir_ / (id + ".jsonl"); }
  std::filesystem::path descriptor_path(const std::string& id) const {
    return data_dir_ / (id + ".session.json");
  }
  nlohmann::json problem_json(const SessionState& state) const;

  std::shared_ptr<const Orchestrator> es_;
  std::shared_ptr<const Orchestrator> baseline_;
  std::shared_ptr<const ScenarioStore> scenarios_;
  std::filesystem::path data_dir_;
  std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// Replays a trace log through the orchestrator. Throws TraceIoError if the
// reproduced decisions diverge from the log.
SessionState rebuild_session(const Orchestrator& orchestrator, const SessionDescriptor& descriptor,
                             const std::vector<TurnTrace>& traces);

void to_json(nlohmann::json& j, const SessionDescriptor& d);
void from_json(const nlohmann::json& j, SessionDescriptor& d);

// Parses a turn body {kind, answer?, confidence?}; ValidationError names the bad field.
StudentInput parse_turn_request(const nlohmann::json& body);
CreateSessionRequest parse_create_request(const nlohmann::json& body);

}  // namespace tutor
