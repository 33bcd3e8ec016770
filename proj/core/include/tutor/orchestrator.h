#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tutor/agents.h"
#include "tutor/content.h"
#include "tutor/knowledge_tracing.h"
#include "tutor/learner_features.h"
#include "tutor/policy_config.h"
#include "tutor/renderer.h"

namespace tutor {

struct Suppression {
  AgentProposal proposal;
  std::string reason;

  friend bool operator==(const Suppression&, const Suppression&) = default;
};

struct TurnDecision {
  std::vector<AgentProposal> actions;  // priority order
  std::vector<Suppression> suppressed;
  std::vector<ConstraintCheck> constraint_checks;  // attempt_before_hint, hint_cap
  // Non-empty only when the runtime guard had to strip a hint.
  std::vector<std::string> safety_incidents;

  bool contains(ActionType a) const;
  std::optional<ActionType> delivered_hint() const;
  const ConstraintCheck& check(ConstraintName name) const;

  friend bool operator==(const TurnDecision&, const TurnDecision&) = default;
};

// Audits a final action list against both constraints. `hint_requested`
// marks turns where a hint was in play even if none was proposed.
std::vector<ConstraintCheck> audit_constraints(const std::vector<AgentProposal>& actions,
                                               const LearnerSnapshot& snapshot,
                                               const PolicyConfig& config, bool hint_in_play);

// Subsumption arbitration. Total: every proposal ends up either in
// `actions` or in `suppressed`.
TurnDecision arbitrate(const std::vector<AgentProposal>& proposals,
                       const LearnerSnapshot& snapshot, const PolicyConfig& config = {});

enum class PolicyKind { kEs, kBaseline };
std::string_view to_string(PolicyKind p);
PolicyKind policy_from_string(std::string_view s);

struct StudentInput {
  InputKind kind = InputKind::kAttempt;
  std::optional<std::string> answer;
  std::optional<int> confidence;
  std::optional<std::int64_t> timestamp_ms;
  std::optional<std::uint32_t> response_ms;

  friend bool operator==(const StudentInput&, const StudentInput&) = default;
};

struct SessionState {
  std::string session_id;
  PolicyKind policy = PolicyKind::kEs;
  std::optional<std::string> scenario_id;
  std::string skill_id;
  std::vector<std::string> problem_ids;
  std::size_t problem_index = 0;
  bool complete = false;

  std::uint32_t attempt_count_problem = 0;
  std::uint32_t low_effort_attempts_problem = 0;
  std::uint32_t errors_problem = 0;
  std::uint32_t hints_given_problem = 0;
  std::uint32_t remediation_streak = 0;
  // Hint delivered since the learner's last attempt, if any.
  std::optional<HintLevel> pending_hint;

  LearnerFeatureState features;
  std::map<std::string, SkillMastery> mastery;
  std::vector<DialogueTurn> history;
  std::uint64_t turn_index = 0;
  std::int64_t clock_ms = 0;
  std::uint64_t seed = 0;

  const std::string& current_problem() const { return problem_ids.at(problem_index); }
};

struct TurnTrace {
  std::uint64_t turn_index = 0;
  std::string session_id;
  PolicyKind policy = PolicyKind::kEs;
  std::string policy_hash;
  StudentInput input;
  std::string problem_id;
  LearnerSnapshot snapshot;
  std::vector<AgentProposal> proposals;
  TurnDecision decision;
  std::string rendered_text;
  RendererMode renderer_mode = RendererMode::kTemplate;
  std::string renderer_failure;
  std::uint64_t prompt_token_count = 0;
  std::uint64_t completion_token_count = 0;
  double latency_ms = 0.0;
  std::uint64_t rng_seed_state = 0;
  std::optional<std::string> next_problem_id;
  bool session_complete = false;

  std::string trace_id() const { return session_id + ":" + std::to_string(turn_index); }

  friend bool operator==(const TurnTrace&, const TurnTrace&) = default;
};

struct TurnResult {
  TurnTrace trace;
  SessionState state;
};

// Deterministic latency charged per turn in template mode.
struct LatencyModel {
  double rule_evaluation_ms = 1.0;
  double template_render_ms = 2.0;
};

class Orchestrator {
 public:
  Orchestrator(PolicyConfig config, std::shared_ptr<const ContentStore> content,
               Renderer renderer = Renderer());

  SessionState start_session(std::string session_id, PolicyKind policy, std::string skill_id,
                             std::vector<std::string> problem_ids,
                             std::optional<std::string> scenario_id = std::nullopt,
                             std::uint64_t seed = 0) const;

  // feature update -> BKT update (attempts) -> affect -> proposals ->
  // arbitration -> render -> trace. Never aborts on renderer failure.
  TurnResult process_turn(const SessionState& state, const StudentInput& input) const;

  const PolicyConfig& config() const { return config_; }
  const ContentStore& content() const { return *content_; }
  const Renderer& renderer() const { return renderer_; }
  const std::string& policy_hash() const { return policy_hash_; }

 private:
  PolicyConfig config_;
  std::string policy_hash_;
  std::shared_ptr<const ContentStore> content_;
  Renderer renderer_;
  LatencyModel latency_;
};

// ---- trace persistence ----

class TraceIoError : public Error {
 public:
  using Error::Error;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void append(const TurnTrace& trace) = 0;
};

// One JSON object per line. Appends from multiple threads are serialized and
// each record is written with a single write + flush.
class JsonlTraceSink : public TraceSink {
 public:
  explicit JsonlTraceSink(std::filesystem::path path);
  void append(const TurnTrace& trace) override;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

class MemoryTraceSink : public TraceSink {
 public:
  void append(const TurnTrace& trace) override;
  std::vector<TurnTrace> traces() const;

 private:
  mutable std::mutex mu_;
  std::vector<TurnTrace> traces_;
};

struct LogAck {
  std::uint64_t turn_index = 0;
  std::string trace_id;
};

// Throws TraceIoError naming the sink when the write fails.
LogAck log_turn(TraceSink& sink, const TurnTrace& trace);

std::string trace_to_jsonl(const TurnTrace& trace);
std::vector<TurnTrace> read_traces(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const StudentInput& in);
void from_json(const nlohmann::json& j, StudentInput& in);
void to_json(nlohmann::json& j, const TurnDecision& d);
void from_json(const nlohmann::json& j, TurnDecision& d);
void to_json(nlohmann::json& j, const TurnTrace& t);
void from_json(const nlohmann::json& j, TurnTrace& t);

}  // namespace tutor
