#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <fstream>
#include <random>
#include <thread>

#include "fixtures.h"
#include "tutor/baseline.h"
#include "tutor/orchestrator.h"

namespace {

using namespace tutor;
using fixtures::attempt;
using fixtures::hint;

AgentProposal prop(AgentId a, ActionType t) { return {a, t, "k", {}}; }

LearnerSnapshot attempted(std::uint32_t attempts = 1) {
  LearnerSnapshot s;
  s.attempt_count_problem = attempts;
  s.last_input_kind = InputKind::kAttempt;
  s.last_correct = false;
  return s;
}

std::vector<ActionType> actions(const TurnDecision& d) {
  std::vector<ActionType> out;
  for (const auto& a : d.actions) out.push_back(a.action);
  return out;
}

TEST(Arbitrate, DenySuppressesHints) {
  LearnerSnapshot s;
  s.last_input_kind = InputKind::kHintRequest;
  AgentProposal deny{AgentId::kEthics, ActionType::kDenyHint, "attempt_before_hint",
                     {{"reason", "attempt_before_hint"}}};
  const auto d = arbitrate({prop(AgentId::kScaffold, ActionType::kHintFull), deny}, s);
  EXPECT_EQ(actions(d), std::vector{ActionType::kDenyHint});
  ASSERT_EQ(d.suppressed.size(), 1u);
  EXPECT_EQ(d.suppressed[0].proposal.action, ActionType::kHintFull);
  EXPECT_EQ(d.suppressed[0].reason, "attempt_before_hint");
  EXPECT_TRUE(d.safety_incidents.empty());
}

TEST(Arbitrate, PriorityOrder) {
  auto d = arbitrate({prop(AgentId::kTutor, ActionType::kNextProblem), prop(AgentId::kFeedback, ActionType::kConfirm)},
                     attempted());
  EXPECT_EQ(actions(d), (std::vector{ActionType::kConfirm, ActionType::kNextProblem}));
  d = arbitrate({prop(AgentId::kMotivator, ActionType::kEncourage), prop(AgentId::kScaffold, ActionType::kHintMin),
                 prop(AgentId::kFeedback, ActionType::kRemediate)},
                attempted());
  EXPECT_EQ(actions(d), (std::vector{ActionType::kRemediate, ActionType::kHintMin, ActionType::kEncourage}));
}

TEST(Arbitrate, RuntimeGuardStripsViolatingHints) {
  auto d = arbitrate({prop(AgentId::kScaffold, ActionType::kHintFull)}, LearnerSnapshot{});
  EXPECT_EQ(actions(d), std::vector{ActionType::kDenyHint});
  EXPECT_EQ(d.safety_incidents.size(), 1u);
  auto capped = attempted(2);
  capped.hints_given_problem = 3;
  d = arbitrate({prop(AgentId::kScaffold, ActionType::kHintMin)}, capped);
  EXPECT_FALSE(d.delivered_hint().has_value());
  EXPECT_EQ(d.suppressed.at(0).reason, "safety_guard");
}

TEST(Arbitrate, TotalAndDuplicateAgents) {
  const auto d = arbitrate({prop(AgentId::kFeedback, ActionType::kConfirm), prop(AgentId::kFeedback, ActionType::kNudge)},
                           attempted());
  EXPECT_EQ(d.actions.size() + d.suppressed.size(), 2u);
  EXPECT_EQ(d.suppressed.at(0).reason, "duplicate_agent");
}

TEST(Arbitrate, SingleAgentMode) {
  PolicyConfig cfg;
  cfg.single_agent_mode = true;
  const auto d = arbitrate({prop(AgentId::kMotivator, ActionType::kEncourage), prop(AgentId::kFeedback, ActionType::kRemediate)},
                           attempted(), cfg);
  EXPECT_EQ(actions(d), std::vector{ActionType::kRemediate});
  EXPECT_EQ(d.actions.size() + d.suppressed.size(), 2u);
}

TEST(Arbitrate, BothChecksEveryTurn) {
  const auto d = arbitrate({}, LearnerSnapshot{});
  ASSERT_EQ(d.constraint_checks.size(), 2u);
  EXPECT_EQ(d.constraint_checks[0].name, ConstraintName::kAttemptBeforeHint);
  EXPECT_EQ(d.constraint_checks[1].name, ConstraintName::kHintCap);
}

TEST(ProcessTurn, ImmediateHintRequestIsDenied) {
  const Orchestrator orch(PolicyConfig{}, fixtures::content());
  const auto s0 = orch.start_session("s", PolicyKind::kEs, "add", {"p1", "p2"});
  const auto r = orch.process_turn(s0, hint());
  EXPECT_EQ(actions(r.trace.decision), std::vector{ActionType::kDenyHint});
  EXPECT_EQ(r.trace.decision.actions[0].rationale_key, "attempt_before_hint");
  EXPECT_EQ(r.state.hints_given_problem, 0u);
  EXPECT_NE(r.trace.rendered_text.find("try first"), std::string::npos) << r.trace.rendered_text;
}

TEST(ProcessTurn, CrossingMasteryAdvances) {
  PolicyConfig cfg;
  cfg.bkt.set("add", BktParams(0.94, 0.1, 0.1, 0.2));
  // 0.94*0.9 / (0.94*0.9 + 0.06*0.2) = 0.98601..., then learning gives ~0.98741
  const double expected = [] {
    const double c = 0.94 * 0.9 / (0.94 * 0.9 + 0.06 * 0.2);
    return c + (1 - c) * 0.1;
  }();
  ASSERT_GT(expected, 0.95);
  const Orchestrator orch(cfg, fixtures::content());
  const auto s0 = orch.start_session("s", PolicyKind::kEs, "add", {"p1", "p2"});
  const auto r = orch.process_turn(s0, attempt("11"));
  EXPECT_EQ(actions(r.trace.decision), (std::vector{ActionType::kConfirm, ActionType::kNextProblem}));
  EXPECT_NEAR(r.state.mastery.at("add").p_mastery, expected, 1e-12);
  EXPECT_EQ(r.state.current_problem(), "p2");
  EXPECT_EQ(r.trace.next_problem_id, "p2");
  EXPECT_EQ(r.state.attempt_count_problem, 0u);
}

TEST(ProcessTurn, IncorrectThenHintFollowsLadder) {
  const Orchestrator orch(PolicyConfig{}, fixtures::content());
  auto s = orch.start_session("s", PolicyKind::kEs, "add", {"p1"});
  s = orch.process_turn(s, attempt("99")).state;
  const auto r = orch.process_turn(s, hint());
  EXPECT_EQ(r.trace.decision.delivered_hint(), ActionType::kHintMin);
  for (const auto& c : r.trace.decision.constraint_checks) EXPECT_TRUE(c.passed());
  EXPECT_EQ(r.state.hints_given_problem, 1u);
  EXPECT_NE(r.trace.rendered_text.find("Start with the ones."), std::string::npos);
}

TEST(ProcessTurn, LowEffortIsNotAnAttempt) {
  const Orchestrator orch(PolicyConfig{}, fixtures::content());
  auto s = orch.start_session("s", PolicyKind::kEs, "add", {"p1"});
  s = orch.process_turn(s, attempt("idk")).state;
  const auto r = orch.process_turn(s, hint());
  EXPECT_TRUE(r.trace.decision.contains(ActionType::kDenyHint));
}

TEST(ProcessTurn, CapHolds) {
  const Orchestrator orch(PolicyConfig{}, fixtures::content());
  auto s = orch.start_session("s", PolicyKind::kEs, "add", {"p1"});
  int hints = 0;
  for (int i = 0; i < 8; ++i) {
    // proactive hints arrive on attempt turns too
    for (const auto& in : {attempt("0"), hint()}) {
      auto r = orch.process_turn(s, in);
      if (r.trace.decision.delivered_hint()) ++hints;
      s = r.state;
    }
  }
  EXPECT_EQ(hints, 3);
  EXPECT_EQ(s.hints_given_problem, 3u);
}

TEST(ProcessTurn, BaselineOverAssists) {
  const Orchestrator orch(PolicyConfig{}, fixtures::content());
  auto s = orch.start_session("s", PolicyKind::kBaseline, "add", {"p1"});
  auto r = orch.process_turn(s, hint());
  EXPECT_EQ(r.trace.decision.delivered_hint(), ActionType::kHintFull);
  EXPECT_EQ(r.trace.decision.check(ConstraintName::kAttemptBeforeHint).status, ConstraintStatus::kViolated);
  s = orch.process_turn(r.state, attempt("0")).state;
  EXPECT_EQ(s.hints_given_problem, 2u);  // proactive FULL after one error
  r = orch.process_turn(s, attempt("11"));
  EXPECT_TRUE(r.trace.decision.contains(ActionType::kConfirm));
}

TEST(ProcessTurn, DeterministicAndHashed) {
  const Orchestrator orch(PolicyConfig{}, fixtures::content());
  auto run = [&] {
    auto s = orch.start_session("s", PolicyKind::kEs, "add", {"p1", "p2", "p3"});
    std::string out;
    for (const auto& in : {hint(), attempt("0"), attempt("1"), hint(), attempt("11"), attempt("12")}) {
      if (s.complete) break;
      auto r = orch.process_turn(s, in);
      out += trace_to_jsonl(r.trace);
      s = r.state;
    }
    return out;
  };
  EXPECT_EQ(run(), run());
  EXPECT_EQ(orch.policy_hash(), PolicyConfig{}.hash());
  PolicyConfig other;
  other.hint_cap = 2;
  EXPECT_NE(other.hash(), PolicyConfig{}.hash());
}

TEST(ProcessTurn, RejectsBadInput) {
  const Orchestrator orch(PolicyConfig{}, fixtures::content());
  auto s = orch.start_session("s", PolicyKind::kEs, "add", {"p1"});
  StudentInput in;
  in.kind = InputKind::kAttempt;
  EXPECT_THROW(orch.process_turn(s, in), ValidationError);
  EXPECT_THROW(orch.start_session("s", PolicyKind::kEs, "add", {"nope"}), NotFoundError);
}

// Random walk over learner inputs: the safety invariant and priority order hold on every turn.
TEST(ProcessTurn, SafetyFuzz) {
  const Orchestrator orch(PolicyConfig{}, fixtures::content(3));
  std::mt19937_64 gen(99);
  const int order[] = {0, 1, 2, 3, 4, 5};
  (void)order;
  for (int session = 0; session < 300; ++session) {
    auto s = orch.start_session("f", PolicyKind::kEs, "add", {"p1", "p2", "p3"});
    for (int t = 0; t < 40 && !s.complete; ++t) {
      StudentInput in;
      switch (gen() % 5) {
        case 0: in = hint(); break;
        case 1: in = attempt("idk"); break;
        case 2: in = attempt(orch.content().problem("add", s.current_problem()).answer); break;
        case 3: in.kind = InputKind::kChat; in.answer = "hello"; break;
        default: in = attempt("0");
      }
      if (gen() % 3 == 0) in.confidence = 1 + static_cast<int>(gen() % 5);
      const auto r = orch.process_turn(s, in);
      const auto& d = r.trace.decision;
      if (d.delivered_hint()) {
        ASSERT_GT(r.trace.snapshot.genuine_attempts(), 0u);
        ASSERT_LT(r.trace.snapshot.hints_given_problem, 3u);
        ASSERT_FALSE(d.contains(ActionType::kDenyHint));
      }
      ASSERT_TRUE(d.safety_incidents.empty());
      for (std::size_t i = 1; i < d.actions.size(); ++i) {
        ASSERT_LT(priority_rank(d.actions[i - 1].agent), priority_rank(d.actions[i].agent));
      }
      for (const auto& c : d.constraint_checks) ASSERT_TRUE(c.passed());
      s = r.state;
    }
  }
}

TEST(Traces, JsonlRoundTrip) {
  fixtures::TempDir dir;
  const Orchestrator orch(PolicyConfig{}, fixtures::content());
  auto s = orch.start_session("rt", PolicyKind::kEs, "add", {"p1", "p2"});
  std::vector<TurnTrace> written;
  {
    JsonlTraceSink sink(dir.path / "t.jsonl");
    for (int i = 0; i < 100 && !s.complete; ++i) {
      auto r = orch.process_turn(s, i % 3 == 0 ? hint() : attempt(i % 2 ? "0" : "11"));
      const auto ack = log_turn(sink, r.trace);
      EXPECT_EQ(ack.turn_index, static_cast<std::uint64_t>(i));
      written.push_back(r.trace);
      s = r.state;
    }
  }
  const auto back = read_traces(dir.path / "t.jsonl");
  ASSERT_EQ(back.size(), written.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i], written[i]) << i;
  std::ifstream in(dir.path / "t.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, written.size());
}

TEST(Traces, UnwritableSinkNamesPath) {
  try {
    JsonlTraceSink sink("/nonexistent-dir/x/t.jsonl");
    const Orchestrator orch(PolicyConfig{}, fixtures::content());
    auto r = orch.process_turn(orch.start_session("s", PolicyKind::kEs, "add", {"p1"}), hint());
    log_turn(sink, r.trace);
    FAIL() << "expected TraceIoError";
  } catch (const TraceIoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/x/t.jsonl"), std::string::npos);
  }
}

TEST(Traces, ConcurrentAppendsStayWhole) {
  fixtures::TempDir dir;
  const Orchestrator orch(PolicyConfig{}, fixtures::content());
  JsonlTraceSink sink(dir.path / "c.jsonl");
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      auto s = orch.start_session("w" + std::to_string(w), PolicyKind::kEs, "add", {"p1"});
      for (int i = 0; i < 50; ++i) {
        auto r = orch.process_turn(s, attempt("0"));
        log_turn(sink, r.trace);
        s = r.state;
      }
    });
  }
  for (auto& t : workers) t.join();
  EXPECT_EQ(read_traces(dir.path / "c.jsonl").size(), 200u);
}

TEST(Traces, MalformedLineReportsLine) {
  fixtures::TempDir dir;
  std::ofstream(dir.path / "bad.jsonl") << "{}\nnot json\n";
  try {
    read_traces(dir.path / "bad.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

}  // namespace
