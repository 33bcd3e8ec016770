#include <benchmark/benchmark.h>

#include <random>

#include "tutor/agents.h"
#include "tutor/knowledge_tracing.h"
#include "tutor/orchestrator.h"
#include "tutor/sim/simulation.h"

using namespace tutor;

static void BM_BktUpdate(benchmark::State& state) {
  const BktParams p(0.3, 0.1, 0.1, 0.2);
  SkillMastery m{"s", 0.3, 0};
  bool correct = false;
  for (auto _ : state) {
    m = bkt_update(m, p, correct);
    correct = !correct;
    benchmark::DoNotOptimize(m.p_mastery);
  }
}
BENCHMARK(BM_BktUpdate);

static LearnerSnapshot busy_snapshot() {
  LearnerSnapshot s;
  s.skill_id = "s";
  s.problem_id = "p1";
  s.attempt_count_problem = 2;
  s.errors_problem = 2;
  s.hints_given_problem = 1;
  s.features.error_streak = 2;
  s.mastery = {"s", 0.4, 2};
  s.last_correct = false;
  s.last_input_kind = InputKind::kHintRequest;
  return s;
}

static void BM_EnsembleAndArbitrate(benchmark::State& state) {
  const PolicyConfig cfg;
  const auto s = busy_snapshot();
  for (auto _ : state) {
    const auto out = run_ensemble(s, cfg);
    benchmark::DoNotOptimize(arbitrate(out.proposals, s, cfg));
  }
}
BENCHMARK(BM_EnsembleAndArbitrate);

// Whole turn in template mode, including the trace record.
static void BM_ProcessTurn(benchmark::State& state) {
  const Orchestrator orch(PolicyConfig{}, sim::make_sim_content(5));
  const auto policy = state.range(0) ? PolicyKind::kBaseline : PolicyKind::kEs;
  const auto problems = sim::make_sim_content(5)->problems(sim::kSimSkill);
  std::vector<std::string> ids;
  for (const auto* p : problems) ids.push_back(p->problem_id);
  const auto start = orch.start_session("b", policy, sim::kSimSkill, ids);
  StudentInput wrong;
  wrong.answer = "-1";
  const auto warm = orch.process_turn(start, wrong).state;
  StudentInput hint;
  hint.kind = InputKind::kHintRequest;
  for (auto _ : state) {
    benchmark::DoNotOptimize(orch.process_turn(warm, hint));
  }
}
BENCHMARK(BM_ProcessTurn)->Arg(0)->Arg(1);
