#include "tutor/agents.h"

#include <array>
#include <utility>

#include <nlohmann/json.hpp>

#include "tutor/errors.h"

namespace tutor {
namespace {

template <typename Enum, std::size_t N>
using NameTable = std::array<std::pair<Enum, std::string_view>, N>;

constexpr NameTable<ActionType, 10> kActionNames{{
    {ActionType::kConfirm, "CONFIRM"},
    {ActionType::kNudge, "NUDGE"},
    {ActionType::kRemediate, "REMEDIATE"},
    {ActionType::kRemediateDeep, "REMEDIATE_DEEP"},
    {ActionType::kHintMin, "HINT_MIN"},
    {ActionType::kHintMed, "HINT_MED"},
    {ActionType::kHintFull, "HINT_FULL"},
    {ActionType::kDenyHint, "DENY_HINT"},
    {ActionType::kEncourage, "ENCOURAGE"},
    {ActionType::kNextProblem, "NEXT_PROBLEM"},
}};

constexpr NameTable<AgentId, 6> kAgentNames{{
    {AgentId::kEthics, "Ethics"},
    {AgentId::kAssessment, "Assessment"},
    {AgentId::kFeedback, "Feedback"},
    {AgentId::kScaffold, "Scaffold"},
    {AgentId::kMotivator, "Motivator"},
    {AgentId::kTutor, "Tutor"},
}};

constexpr NameTable<AffectState, 3> kAffectNames{{
    {AffectState::kNeutral, "neutral"},
    {AffectState::kFrustrated, "frustrated"},
    {AffectState::kLowConfidence, "low_confidence"},
}};

constexpr NameTable<InputKind, 3> kInputNames{{
    {InputKind::kAttempt, "attempt"},
    {InputKind::kHintRequest, "hint_request"},
    {InputKind::kChat, "chat"},
}};

constexpr NameTable<HintLevel, 3> kLevelNames{{
    {HintLevel::kMin, "MIN"},
    {HintLevel::kMed, "MED"},
    {HintLevel::kFull, "FULL"},
}};

constexpr NameTable<ConstraintName, 2> kConstraintNames{{
    {ConstraintName::kAttemptBeforeHint, "attempt_before_hint"},
    {ConstraintName::kHintCap, "hint_cap"},
}};

constexpr NameTable<ConstraintStatus, 3> kStatusNames{{
    {ConstraintStatus::kSatisfied, "satisfied"},
    {ConstraintStatus::kBlocked, "blocked"},
    {ConstraintStatus::kViolated, "violated"},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(const NameTable<Enum, N>& table, Enum value) {
  for (const auto& [e, name] : table) {
    if (e == value) return name;
  }
  return "?";
}

template <typename Enum, std::size_t N>
Enum parse_name(const NameTable<Enum, N>& table, std::string_view s, const char* what) {
  for (const auto& [e, name] : table) {
    if (name == s) return e;
  }
  throw ValidationError(what, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

AgentProposal make(AgentId agent, ActionType action, std::string rationale,
                   std::map<std::string, std::string> params = {}) {
  return AgentProposal{agent, action, std::move(rationale), std::move(params)};
}

}  // namespace

std::string_view to_string(ActionType a) { return name_of(kActionNames, a); }
std::string_view to_string(AgentId a) { return name_of(kAgentNames, a); }
std::string_view to_string(AffectState a) { return name_of(kAffectNames, a); }
std::string_view to_string(InputKind k) { return name_of(kInputNames, k); }
std::string_view to_string(HintLevel l) { return name_of(kLevelNames, l); }
std::string_view to_string(ConstraintName n) { return name_of(kConstraintNames, n); }
std::string_view to_string(ConstraintStatus s) { return name_of(kStatusNames, s); }

ActionType action_from_string(std::string_view s) { return parse_name(kActionNames, s, "action"); }
AgentId agent_from_string(std::string_view s) { return parse_name(kAgentNames, s, "agent"); }
AffectState affect_from_string(std::string_view s) { return parse_name(kAffectNames, s, "affect"); }
InputKind input_kind_from_string(std::string_view s) { return parse_name(kInputNames, s, "kind"); }
HintLevel hint_level_from_string(std::string_view s) { return parse_name(kLevelNames, s, "level"); }
ConstraintName constraint_from_string(std::string_view s) {
  return parse_name(kConstraintNames, s, "constraint");
}
ConstraintStatus constraint_status_from_string(std::string_view s) {
  return parse_name(kStatusNames, s, "status");
}

std::optional<HintLevel> hint_level_of(ActionType a) {
  switch (a) {
    case ActionType::kHintMin: return HintLevel::kMin;
    case ActionType::kHintMed: return HintLevel::kMed;
    case ActionType::kHintFull: return HintLevel::kFull;
    default: return std::nullopt;
  }
}

ActionType hint_action(HintLevel level) {
  switch (level) {
    case HintLevel::kMin: return ActionType::kHintMin;
    case HintLevel::kMed: return ActionType::kHintMed;
    case HintLevel::kFull: break;
  }
  return ActionType::kHintFull;
}

AffectState detect_affect(const LearnerSnapshot& s, const PolicyConfig& config) {
  if (s.features.error_streak >= config.frustration_error_streak || s.features.wheel_spinning) {
    return AffectState::kFrustrated;
  }
  if (s.confidence && *s.confidence <= config.low_confidence_max) {
    return AffectState::kLowConfidence;
  }
  return AffectState::kNeutral;
}

std::optional<AgentProposal> feedback_propose(const LearnerSnapshot& s,
                                              const PolicyConfig& config) {
  if (s.last_input_kind != InputKind::kAttempt || !s.last_correct) return std::nullopt;
  if (*s.last_correct) return make(AgentId::kFeedback, ActionType::kConfirm, "correct_answer");
  if (s.mastery.p_mastery >= config.nudge_mastery_split) {
    return make(AgentId::kFeedback, ActionType::kNudge, "likely_slip");
  }
  if (s.remediation_streak >= config.deep_remediation_after) {
    return make(AgentId::kFeedback, ActionType::kRemediateDeep, "strategy_change");
  }
  return make(AgentId::kFeedback, ActionType::kRemediate, "misconception");
}

std::optional<AgentProposal> scaffold_propose(const LearnerSnapshot& s,
                                              const PolicyConfig& config) {
  if (s.hints_given_problem >= config.hint_cap) return std::nullopt;
  const bool requested = s.last_input_kind == InputKind::kHintRequest;
  const bool proactive = s.last_input_kind == InputKind::kAttempt && s.last_correct == false &&
                         s.features.error_streak >= config.proactive_hint_error_streak;
  if (!requested && !proactive) return std::nullopt;

  HintLevel level = HintLevel::kMin;
  if (s.errors_problem >= 3) level = HintLevel::kFull;
  else if (s.errors_problem == 2) level = HintLevel::kMed;

  return make(AgentId::kScaffold, hint_action(level), requested ? "hint_requested" : "error_streak",
              {{"level", std::string(to_string(level))}});
}

std::optional<AgentProposal> motivator_propose(const LearnerSnapshot& s,
                                               const PolicyConfig& config) {
  if (s.affect == AffectState::kFrustrated) {
    return make(AgentId::kMotivator, ActionType::kEncourage, "frustration");
  }
  if (s.affect == AffectState::kLowConfidence) {
    return make(AgentId::kMotivator, ActionType::kEncourage, "low_confidence");
  }
  if (s.features.error_streak >= config.motivator_error_streak) {
    return make(AgentId::kMotivator, ActionType::kEncourage, "error_streak");
  }
  return std::nullopt;
}

std::optional<AgentProposal> tutor_propose(const LearnerSnapshot& s, double threshold) {
  if (!is_mastered(s.mastery.p_mastery, threshold)) return std::nullopt;
  return make(AgentId::kTutor, ActionType::kNextProblem, "mastery_reached");
}

EthicsVerdict ethics_check(const LearnerSnapshot& s, std::span<const AgentProposal> candidates,
                           const PolicyConfig& config) {
  bool hint_in_play = s.last_input_kind == InputKind::kHintRequest;
  for (const auto& c : candidates) hint_in_play = hint_in_play || is_hint_delivery(c.action);

  const bool no_attempt = s.genuine_attempts() == 0;
  const bool at_cap = s.hints_given_problem >= config.hint_cap;

  auto check = [&](ConstraintName name, bool would_violate) {
    ConstraintCheck c;
    c.name = name;
    c.hint_in_play = hint_in_play;
    c.status = hint_in_play && would_violate ? ConstraintStatus::kBlocked
                                             : ConstraintStatus::kSatisfied;
    c.attempt_count_problem = s.attempt_count_problem;
    c.genuine_attempts = s.genuine_attempts();
    c.hints_given_problem = s.hints_given_problem;
    c.hint_cap = config.hint_cap;
    return c;
  };

  EthicsVerdict v;
  v.attempt_before_hint = check(ConstraintName::kAttemptBeforeHint, no_attempt);
  v.hint_cap = check(ConstraintName::kHintCap, at_cap);
  if (hint_in_play && (no_attempt || at_cap)) {
    const auto reason = no_attempt ? ConstraintName::kAttemptBeforeHint : ConstraintName::kHintCap;
    v.deny = make(AgentId::kEthics, ActionType::kDenyHint, std::string(to_string(reason)),
                  {{"reason", std::string(to_string(reason))}});
  }
  return v;
}

EnsembleOutput run_ensemble(const LearnerSnapshot& s, const PolicyConfig& config) {
  std::vector<AgentProposal> candidates;
  for (auto p : {feedback_propose(s, config), scaffold_propose(s, config),
                 motivator_propose(s, config), tutor_propose(s, config.mastery_threshold)}) {
    if (p) candidates.push_back(std::move(*p));
  }
  EnsembleOutput out;
  out.verdict = ethics_check(s, candidates, config);
  if (out.verdict.deny) out.proposals.push_back(*out.verdict.deny);
  for (auto& c : candidates) out.proposals.push_back(std::move(c));
  return out;
}

// ---- JSON ----

void to_json(nlohmann::json& j, const AgentProposal& p) {
  j = nlohmann::json{{"agent", to_string(p.agent)},
                     {"action", to_string(p.action)},
                     {"rationale_key", p.rationale_key},
                     {"params", p.params}};
}

void from_json(const nlohmann::json& j, AgentProposal& p) {
  p.agent = agent_from_string(j.at("agent").get<std::string>());
  p.action = action_from_string(j.at("action").get<std::string>());
  j.at("rationale_key").get_to(p.rationale_key);
  p.params = j.value("params", std::map<std::string, std::string>{});
}

void to_json(nlohmann::json& j, const LearnerSnapshot& s) {
  j = nlohmann::json{{"skill_id", s.skill_id},
                     {"problem_id", s.problem_id},
                     {"features", s.features},
                     {"mastery", s.mastery},
                     {"affect", to_string(s.affect)},
                     {"attempt_count_problem", s.attempt_count_problem},
                     {"low_effort_attempts_problem", s.low_effort_attempts_problem},
                     {"errors_problem", s.errors_problem},
                     {"hints_given_problem", s.hints_given_problem},
                     {"remediation_streak", s.remediation_streak},
                     {"last_correct", nullptr},
                     {"last_low_effort", s.last_low_effort},
                     {"confidence", nullptr},
                     {"last_input_kind", to_string(s.last_input_kind)}};
  if (s.last_correct) j["last_correct"] = *s.last_correct;
  if (s.confidence) j["confidence"] = *s.confidence;
}

void from_json(const nlohmann::json& j, LearnerSnapshot& s) {
  j.at("skill_id").get_to(s.skill_id);
  j.at("problem_id").get_to(s.problem_id);
  j.at("features").get_to(s.features);
  j.at("mastery").get_to(s.mastery);
  s.affect = affect_from_string(j.at("affect").get<std::string>());
  j.at("attempt_count_problem").get_to(s.attempt_count_problem);
  j.at("low_effort_attempts_problem").get_to(s.low_effort_attempts_problem);
  j.at("errors_problem").get_to(s.errors_problem);
  j.at("hints_given_problem").get_to(s.hints_given_problem);
  j.at("remediation_streak").get_to(s.remediation_streak);
  const auto& lc = j.at("last_correct");
  s.last_correct = lc.is_null() ? std::nullopt : std::optional<bool>(lc.get<bool>());
  j.at("last_low_effort").get_to(s.last_low_effort);
  const auto& conf = j.at("confidence");
  s.confidence = conf.is_null() ? std::nullopt : std::optional<int>(conf.get<int>());
  s.last_input_kind = input_kind_from_string(j.at("last_input_kind").get<std::string>());
}

void to_json(nlohmann::json& j, const ConstraintCheck& c) {
  j = nlohmann::json{{"name", to_string(c.name)},
                     {"passed", c.passed()},
                     {"status", to_string(c.status)},
                     {"detail",
                      {{"hint_in_play", c.hint_in_play},
                       {"attempt_count_problem", c.attempt_count_problem},
                       {"genuine_attempts", c.genuine_attempts},
                       {"hints_given_problem", c.hints_given_problem},
                       {"hint_cap", c.hint_cap}}}};
}

void from_json(const nlohmann::json& j, ConstraintCheck& c) {
  c.name = constraint_from_string(j.at("name").get<std::string>());
  c.status = constraint_status_from_string(j.at("status").get<std::string>());
  const auto& d = j.at("detail");
  d.at("hint_in_play").get_to(c.hint_in_play);
  d.at("attempt_count_problem").get_to(c.attempt_count_problem);
  d.at("genuine_attempts").get_to(c.genuine_attempts);
  d.at("hints_given_problem").get_to(c.hints_given_problem);
  d.at("hint_cap").get_to(c.hint_cap);
}

}  // namespace tutor
