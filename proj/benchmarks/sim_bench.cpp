#include <benchmark/benchmark.h>

#include <random>

#include "tutor/sim/simulation.h"
#include "tutor/sim/stats.h"

using namespace tutor;

static void BM_Wilcoxon(benchmark::State& state) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> d(0.1, 1.0);
  std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
  for (auto& x : xs) x = d(gen);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::wilcoxon_signed_rank(xs));
  }
}
// 20 is the last exact size, 2400 is a full default cohort
BENCHMARK(BM_Wilcoxon)->Arg(12)->Arg(20)->Arg(21)->Arg(2400);

static void BM_RunDialogue(benchmark::State& state) {
  const auto content = sim::make_sim_content(5);
  const Orchestrator orch(PolicyConfig{}, content);
  sim::DialogueSetup setup;
  setup.skill_id = sim::kSimSkill;
  for (const auto* p : content->problems(sim::kSimSkill)) setup.problem_ids.push_back(p->problem_id);
  const auto policy = state.range(0) ? PolicyKind::kBaseline : PolicyKind::kEs;
  const auto arch = sim::Archetype::defaults().front();
  std::uint64_t i = 0;
  for (auto _ : state) {
    sim::SimRng rng(sim::derive_seed(42, 0, i, 0));
    sim::SimRng lat(sim::derive_seed(42, 0, i, 101));
    auto student = sim::sample_student(arch, 0.05, rng);
    benchmark::DoNotOptimize(sim::run_dialogue(orch, policy, setup, student, rng, lat));
    ++i;
  }
}
BENCHMARK(BM_RunDialogue)->Arg(0)->Arg(1);

static void BM_MonteCarlo(benchmark::State& state) {
  sim::SimConfig cfg;
  cfg.runs_per_archetype = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::run_monte_carlo(cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 8);
}
BENCHMARK(BM_MonteCarlo)->Arg(25)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
