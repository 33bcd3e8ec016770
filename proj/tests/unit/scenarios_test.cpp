#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <set>

#include "tutor/scenarios.h"

namespace {

using namespace tutor;

const ScenarioStore& suite() {
  static const ScenarioStore s = ScenarioStore::embedded();
  return s;
}

const Orchestrator& orch() {
  static const Orchestrator o(PolicyConfig{}, suite().content());
  return o;
}

TEST(Suite, TwentyFourCompleteScenarios) {
  const auto& all = suite().all();
  ASSERT_EQ(all.size(), 24u);
  std::set<std::pair<std::string, std::string>> cells;
  for (const auto& s : all) {
    cells.insert({s.signature, s.difficulty_tier});
    EXPECT_FALSE(s.moves.empty()) << s.scenario_id;
    for (const auto& p : s.problems) {
      EXPECT_FALSE(p.answer.empty());
      EXPECT_EQ(p.hints.size(), 3u) << s.scenario_id << "/" << p.problem_id;
    }
  }
  EXPECT_EQ(cells.size(), 24u);
  std::size_t stand_ins = 0;
  for (const auto& s : all) stand_ins += s.authored_stand_in;
  EXPECT_EQ(stand_ins, 15u);  // five authored signatures x three tiers
}

TEST(Suite, ValidationRejectsIncompleteDocuments) {
  auto doc = nlohmann::json::parse(R"({
    "skills": {"s": [{"problem_id": "a", "prompt": "1+1", "answer": "2", "distractor": "3",
                      "hints": {"MIN": "m", "MED": "d"}}]},
    "scenarios": []})");
  EXPECT_THROW(ScenarioStore::from_json(doc), ValidationError);
  doc["skills"]["s"][0]["hints"]["FULL"] = "f {answer}";
  const auto store = ScenarioStore::from_json(doc);
  EXPECT_THROW(validate_suite(store), ValidationError);
}

TEST(Suite, FindUnknown) { EXPECT_THROW(suite().find("nope"), NotFoundError); }

TEST(Replay, CleanCorrectUnderEs) {
  for (const char* tier : {"easy", "medium", "hard"}) {
    const auto r = replay_scenario(suite().find(std::string("clean_correct_") + tier), PolicyKind::kEs, orch());
    EXPECT_EQ(r.metrics.hints_given, 0u) << tier;
    EXPECT_DOUBLE_EQ(r.metrics.constraint_adherence, 1.0) << tier;
  }
}

TEST(Replay, HintAbuse) {
  for (const char* tier : {"easy", "medium", "hard"}) {
    const auto& spec = suite().find(std::string("hint_abuse_") + tier);
    for (auto policy : {PolicyKind::kEs, PolicyKind::kBaseline}) {
      const auto r = replay_scenario(spec, policy, orch());
      int pre_attempt = 0, granted = 0;
      for (const auto& t : r.traces) {
        if (t.input.kind != InputKind::kHintRequest || t.snapshot.genuine_attempts() != 0) continue;
        ++pre_attempt;
        granted += t.decision.delivered_hint().has_value();
      }
      ASSERT_GT(pre_attempt, 0) << tier;
      if (policy == PolicyKind::kEs) EXPECT_EQ(granted, 0) << tier;
      else EXPECT_EQ(granted, pre_attempt) << tier;
      if (policy == PolicyKind::kBaseline) {
        EXPECT_LT(r.metrics.constraint_adherence, 1.0);
      }
    }
  }
}

TEST(Replay, ByteIdenticalAcrossRuns) {
  for (const auto& s : suite().all()) {
    for (auto policy : {PolicyKind::kEs, PolicyKind::kBaseline}) {
      const auto a = replay_to_json(replay_scenario(s, policy, orch())).dump();
      const auto b = replay_to_json(replay_scenario(s, policy, orch())).dump();
      ASSERT_EQ(a, b) << s.scenario_id;
    }
  }
}

TEST(Replay, EsAdheresOnEveryScenario) {
  for (const auto& s : suite().all()) {
    const auto r = replay_scenario(s, PolicyKind::kEs, orch());
    EXPECT_DOUBLE_EQ(r.metrics.constraint_adherence, 1.0) << s.scenario_id;
    EXPECT_EQ(r.traces.size() * 2, r.transcript.size());
  }
}

TEST(Replay, DeepStruggleEscalates) {
  const auto r = replay_scenario(suite().find("deep_struggle_medium"), PolicyKind::kEs, orch());
  bool deep = false, full_after_deep = false;
  for (const auto& t : r.traces) {
    if (t.decision.contains(ActionType::kRemediateDeep)) deep = true;
    if (deep && t.decision.delivered_hint() == ActionType::kHintFull) full_after_deep = true;
  }
  EXPECT_TRUE(deep);
  EXPECT_TRUE(full_after_deep);
}

TEST(Replay, NeedsMoves) {
  ScenarioSpec s = suite().find("clean_correct_easy");
  s.moves.clear();
  EXPECT_THROW(replay_scenario(s, PolicyKind::kEs, orch()), PreconditionError);
}

}  // namespace
