#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <random>

#include "tutor/agents.h"
#include "tutor/content.h"

namespace {

using namespace tutor;

LearnerSnapshot attempt(bool correct, double pl) {
  LearnerSnapshot s;
  s.skill_id = "frac";
  s.problem_id = "p1";
  s.mastery = {"frac", pl, 1};
  s.last_input_kind = InputKind::kAttempt;
  s.last_correct = correct;
  s.attempt_count_problem = 1;
  if (!correct) {
    s.errors_problem = 1;
    s.features.error_streak = 1;
  }
  return s;
}

LearnerSnapshot hint_request(std::uint32_t attempts, std::uint32_t errors, std::uint32_t hints) {
  LearnerSnapshot s;
  s.skill_id = "frac";
  s.problem_id = "p1";
  s.mastery = {"frac", 0.3, attempts};
  s.last_input_kind = InputKind::kHintRequest;
  s.attempt_count_problem = attempts;
  s.errors_problem = errors;
  s.hints_given_problem = hints;
  return s;
}

TEST(Affect, Rules) {
  LearnerSnapshot s;
  s.features.error_streak = 3;
  EXPECT_EQ(detect_affect(s), AffectState::kFrustrated);
  s.features.error_streak = 0;
  s.confidence = 2;
  EXPECT_EQ(detect_affect(s), AffectState::kLowConfidence);
  s.confidence = 4;
  s.features.error_streak = 1;
  EXPECT_EQ(detect_affect(s), AffectState::kNeutral);
  s.features.wheel_spinning = true;
  s.confidence = 1;
  EXPECT_EQ(detect_affect(s), AffectState::kFrustrated);
}

TEST(Feedback, RuleTable) {
  EXPECT_EQ(feedback_propose(attempt(true, 0.6))->action, ActionType::kConfirm);
  EXPECT_EQ(feedback_propose(attempt(false, 0.8))->action, ActionType::kNudge);
  EXPECT_EQ(feedback_propose(attempt(false, 0.3))->action, ActionType::kRemediate);
  auto s = attempt(false, 0.3);
  s.remediation_streak = 2;
  EXPECT_EQ(feedback_propose(s)->action, ActionType::kRemediateDeep);
  EXPECT_FALSE(feedback_propose(hint_request(1, 1, 0)).has_value());
  auto chat = attempt(true, 0.6);
  chat.last_input_kind = InputKind::kChat;
  EXPECT_FALSE(feedback_propose(chat).has_value());
}

TEST(Scaffold, Ladder) {
  EXPECT_EQ(scaffold_propose(hint_request(1, 1, 0))->action, ActionType::kHintMin);
  EXPECT_EQ(scaffold_propose(hint_request(2, 2, 0))->action, ActionType::kHintMed);
  EXPECT_EQ(scaffold_propose(hint_request(3, 3, 0))->action, ActionType::kHintFull);
  EXPECT_FALSE(scaffold_propose(hint_request(3, 3, 3)).has_value());
}

TEST(Scaffold, ProactiveOnStreak) {
  auto s = attempt(false, 0.2);
  EXPECT_FALSE(scaffold_propose(s).has_value());
  s.features.error_streak = 2;
  s.errors_problem = 2;
  s.attempt_count_problem = 2;
  const auto p = scaffold_propose(s);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->action, ActionType::kHintMed);
  EXPECT_EQ(p->rationale_key, "error_streak");
}

TEST(Motivator, Rules) {
  LearnerSnapshot s;
  s.affect = AffectState::kFrustrated;
  EXPECT_EQ(motivator_propose(s)->action, ActionType::kEncourage);
  s.affect = AffectState::kNeutral;
  EXPECT_FALSE(motivator_propose(s).has_value());
  s.confidence = 1;
  s.affect = detect_affect(s);
  EXPECT_EQ(motivator_propose(s)->action, ActionType::kEncourage);
}

TEST(Tutor, StrictThreshold) {
  LearnerSnapshot s;
  s.mastery.p_mastery = 0.96;
  EXPECT_EQ(tutor_propose(s, 0.95)->action, ActionType::kNextProblem);
  s.mastery.p_mastery = 0.95;
  EXPECT_FALSE(tutor_propose(s, 0.95).has_value());
  s.mastery.p_mastery = 0.10;
  EXPECT_FALSE(tutor_propose(s, 0.95).has_value());
}

TEST(Ethics, Verdicts) {
  const AgentProposal full{AgentId::kScaffold, ActionType::kHintFull, "hint_requested", {}};
  auto v = ethics_check(hint_request(0, 0, 0), std::vector{full});
  ASSERT_TRUE(v.deny.has_value());
  EXPECT_EQ(v.deny->params.at("reason"), "attempt_before_hint");
  EXPECT_EQ(v.attempt_before_hint.status, ConstraintStatus::kBlocked);

  const AgentProposal med{AgentId::kScaffold, ActionType::kHintMed, "hint_requested", {}};
  v = ethics_check(hint_request(2, 2, 3), std::vector{med});
  ASSERT_TRUE(v.deny.has_value());
  EXPECT_EQ(v.deny->params.at("reason"), "hint_cap");
  EXPECT_EQ(v.hint_cap.status, ConstraintStatus::kBlocked);

  const AgentProposal min{AgentId::kScaffold, ActionType::kHintMin, "hint_requested", {}};
  v = ethics_check(hint_request(1, 1, 0), std::vector{min});
  EXPECT_FALSE(v.deny.has_value());
  EXPECT_EQ(v.attempt_before_hint.status, ConstraintStatus::kSatisfied);
  EXPECT_EQ(v.hint_cap.status, ConstraintStatus::kSatisfied);
}

TEST(Ethics, LowEffortAttemptsDoNotCount) {
  auto s = hint_request(2, 2, 0);
  s.low_effort_attempts_problem = 2;
  const auto v = ethics_check(s, std::vector<AgentProposal>{});
  ASSERT_TRUE(v.deny.has_value());
  EXPECT_EQ(v.attempt_before_hint.genuine_attempts, 0u);
  EXPECT_TRUE(is_low_effort("  IDK ", PolicyConfig{}));
  EXPECT_TRUE(is_low_effort("", PolicyConfig{}));
  EXPECT_FALSE(is_low_effort("3/4", PolicyConfig{}));
}

TEST(Ethics, VacuousVerdictEveryTurn) {
  const auto v = ethics_check(attempt(true, 0.5), std::vector<AgentProposal>{});
  EXPECT_FALSE(v.deny.has_value());
  EXPECT_EQ(v.attempt_before_hint.name, ConstraintName::kAttemptBeforeHint);
  EXPECT_EQ(v.hint_cap.name, ConstraintName::kHintCap);
  EXPECT_FALSE(v.attempt_before_hint.hint_in_play);
}

LearnerSnapshot random_snapshot(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> small(0, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LearnerSnapshot s;
  s.skill_id = "frac";
  s.problem_id = "p1";
  s.attempt_count_problem = small(gen);
  s.low_effort_attempts_problem = std::min<std::uint32_t>(small(gen), s.attempt_count_problem);
  s.errors_problem = std::min<std::uint32_t>(small(gen), s.attempt_count_problem);
  s.hints_given_problem = std::min(small(gen), 3);
  s.remediation_streak = small(gen);
  s.features.error_streak = small(gen);
  s.features.wheel_spinning = small(gen) == 0;
  s.mastery.p_mastery = u(gen);
  s.last_input_kind = gen() % 2 ? InputKind::kAttempt : InputKind::kHintRequest;
  if (s.last_input_kind == InputKind::kAttempt) s.last_correct = gen() % 2;
  if (gen() % 2) s.confidence = 1 + static_cast<int>(gen() % 5);
  s.affect = detect_affect(s);
  return s;
}

TEST(Ensemble, PureAndExhaustive) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 20000; ++i) {
    const auto s = random_snapshot(gen);
    const auto a = run_ensemble(s);
    const auto b = run_ensemble(s);
    ASSERT_EQ(a.proposals, b.proposals);
    ASSERT_FALSE(a.proposals.empty());
    std::set<AgentId> agents;
    for (const auto& p : a.proposals) ASSERT_TRUE(agents.insert(p.agent).second);
    if (auto sc = scaffold_propose(s)) ASSERT_LT(s.hints_given_problem, 3u);
    ASSERT_EQ(tutor_propose(s, 0.95).has_value(), is_mastered(s.mastery.p_mastery, 0.95));
  }
}

TEST(Ensemble, SingleProposalPerAgentRoundTrips) {
  const AgentProposal p{AgentId::kScaffold, ActionType::kHintMed, "hint_requested", {{"level", "MED"}}};
  const nlohmann::json j = p;
  EXPECT_EQ(j.get<AgentProposal>(), p);
  const auto s = random_snapshot(*std::make_unique<std::mt19937_64>(5));
  const nlohmann::json js = s;
  EXPECT_EQ(js.get<LearnerSnapshot>(), s);
}

ContentStore store() {
  ContentStore c;
  Problem p;
  p.problem_id = "p1";
  p.prompt = "1/2 + 1/4";
  p.answer = "3/4";
  p.distractor = "2/6";
  p.hints = {{HintLevel::kMin, "common denominator"}, {HintLevel::kFull, "1/2 = 2/4, so {answer}"}};
  c.add("fractions_add", p);
  return c;
}

TEST(DomainHint, Keys) {
  const auto c = store();
  EXPECT_EQ(domain_hint(c, "fractions_add", "p1", HintLevel::kMin), "fractions_add.p1.hint_min");
  EXPECT_EQ(domain_hint(c, "fractions_add", "p1", HintLevel::kFull), "fractions_add.p1.hint_full");
  EXPECT_NE(c.resolve_hint("fractions_add", "p1", HintLevel::kFull).text.find("{answer}"), std::string::npos);
  // MED missing: nearest lower level
  const auto med = c.resolve_hint("fractions_add", "p1", HintLevel::kMed);
  EXPECT_EQ(med.level, HintLevel::kMin);
  EXPECT_THROW(domain_hint(c, "unknown_skill", "p9", HintLevel::kMin), NotFoundError);
}

TEST(Answers, Canonical) {
  EXPECT_TRUE(answers_match(" 2/4 ", "1/2"));
  EXPECT_TRUE(answers_match("x = 4", "4"));
  EXPECT_TRUE(answers_match("4.50", "4.5"));
  EXPECT_FALSE(answers_match("5/6", "2/5"));
}

}  // namespace
