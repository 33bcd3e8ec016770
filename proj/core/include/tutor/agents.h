#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tutor/knowledge_tracing.h"
#include "tutor/learner_features.h"
#include "tutor/policy_config.h"

namespace tutor {

enum class ActionType {
  kConfirm,
  kNudge,
  kRemediate,
  kRemediateDeep,
  kHintMin,
  kHintMed,
  kHintFull,
  kDenyHint,
  kEncourage,
  kNextProblem,
};

// Declaration order is the arbitration priority.
enum class AgentId { kEthics, kAssessment, kFeedback, kScaffold, kMotivator, kTutor };

enum class AffectState { kNeutral, kFrustrated, kLowConfidence };

enum class InputKind { kAttempt, kHintRequest, kChat };

enum class HintLevel { kMin, kMed, kFull };

std::string_view to_string(ActionType a);
std::string_view to_string(AgentId a);
std::string_view to_string(AffectState a);
std::string_view to_string(InputKind k);
std::string_view to_string(HintLevel l);

ActionType action_from_string(std::string_view s);
AgentId agent_from_string(std::string_view s);
AffectState affect_from_string(std::string_view s);
InputKind input_kind_from_string(std::string_view s);
HintLevel hint_level_from_string(std::string_view s);

inline bool is_hint_delivery(ActionType a) {
  return a == ActionType::kHintMin || a == ActionType::kHintMed || a == ActionType::kHintFull;
}
std::optional<HintLevel> hint_level_of(ActionType a);
ActionType hint_action(HintLevel level);

inline int priority_rank(AgentId a) { return static_cast<int>(a); }

struct AgentProposal {
  AgentId agent = AgentId::kFeedback;
  ActionType action = ActionType::kConfirm;
  std::string rationale_key;
  std::map<std::string, std::string> params;

  friend bool operator==(const AgentProposal&, const AgentProposal&) = default;
};

// Everything an agent may read on a turn. Per-problem counters reset when
// the problem changes.
struct LearnerSnapshot {
  std::string skill_id;
  std::string problem_id;
  FeatureVector features;
  SkillMastery mastery;
  AffectState affect = AffectState::kNeutral;
  std::uint32_t attempt_count_problem = 0;
  // Attempts matching the low-effort lexicon ("idk" and friends).
  std::uint32_t low_effort_attempts_problem = 0;
  std::uint32_t errors_problem = 0;
  std::uint32_t hints_given_problem = 0;
  // Consecutive REMEDIATE / REMEDIATE_DEEP feedback on this problem.
  std::uint32_t remediation_streak = 0;
  std::optional<bool> last_correct;
  bool last_low_effort = false;
  std::optional<int> confidence;
  InputKind last_input_kind = InputKind::kChat;

  // Attempts that count for attempt-before-hint.
  std::uint32_t genuine_attempts() const {
    return attempt_count_problem - std::min(attempt_count_problem, low_effort_attempts_problem);
  }

  friend bool operator==(const LearnerSnapshot&, const LearnerSnapshot&) = default;
};

enum class ConstraintName { kAttemptBeforeHint, kHintCap };

// kBlocked: a hint was in play that would have violated the rule and was
// withheld. kViolated: a hint was delivered in breach of the rule.
enum class ConstraintStatus { kSatisfied, kBlocked, kViolated };

std::string_view to_string(ConstraintName n);
std::string_view to_string(ConstraintStatus s);
ConstraintName constraint_from_string(std::string_view s);
ConstraintStatus constraint_status_from_string(std::string_view s);

struct ConstraintCheck {
  ConstraintName name = ConstraintName::kAttemptBeforeHint;
  ConstraintStatus status = ConstraintStatus::kSatisfied;
  bool hint_in_play = false;
  std::uint32_t attempt_count_problem = 0;
  std::uint32_t genuine_attempts = 0;
  std::uint32_t hints_given_problem = 0;
  std::uint32_t hint_cap = 0;

  bool passed() const { return status != ConstraintStatus::kViolated; }

  friend bool operator==(const ConstraintCheck&, const ConstraintCheck&) = default;
};

struct EthicsVerdict {
  std::optional<AgentProposal> deny;
  ConstraintCheck attempt_before_hint;
  ConstraintCheck hint_cap;
};

AffectState detect_affect(const LearnerSnapshot& s, const PolicyConfig& config = {});

std::optional<AgentProposal> feedback_propose(const LearnerSnapshot& s,
                                              const PolicyConfig& config = {});
std::optional<AgentProposal> scaffold_propose(const LearnerSnapshot& s,
                                              const PolicyConfig& config = {});
std::optional<AgentProposal> motivator_propose(const LearnerSnapshot& s,
                                               const PolicyConfig& config = {});
std::optional<AgentProposal> tutor_propose(const LearnerSnapshot& s, double threshold);

// Hint-delivery candidates are judged against attempt-before-hint (genuine
// attempts only) and the per-problem cap. An explicit hint request counts as
// a hint in play even when ScaffoldBot stayed silent at the cap, so the
// learner always gets a visible refusal.
EthicsVerdict ethics_check(const LearnerSnapshot& s, std::span<const AgentProposal> candidates,
                           const PolicyConfig& config = {});

struct EnsembleOutput {
  std::vector<AgentProposal> proposals;  // agent priority order
  EthicsVerdict verdict;
};

// Runs every agent on one immutable snapshot.
EnsembleOutput run_ensemble(const LearnerSnapshot& s, const PolicyConfig& config = {});

void to_json(nlohmann::json& j, const AgentProposal& p);
void from_json(const nlohmann::json& j, AgentProposal& p);
void to_json(nlohmann::json& j, const LearnerSnapshot& s);
void from_json(const nlohmann::json& j, LearnerSnapshot& s);
void to_json(nlohmann::json& j, const ConstraintCheck& c);
void from_json(const nlohmann::json& j, ConstraintCheck& c);

}  // namespace tutor
