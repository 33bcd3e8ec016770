#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutor/knowledge_tracing.h"
#include "tutor/orchestrator.h"
#include "tutor/sim/stats.h"

namespace tutor::sim {

// mt19937_64 underneath, with the real-valued transforms written out here so
// every platform produces the same doubles (std distributions don't promise that).
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();  // [0, 1)
  double normal();   // standard normal, Box-Muller
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

std::uint64_t splitmix64(std::uint64_t x);
// Stream seed for one simulation cell.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c);

struct Archetype {
  std::string name;
  BktParams center;
  double hint_request_rate = 0.0;
  double low_effort_rate = 0.0;
  int confidence_bias = 0;  // -2..+2

  static std::vector<Archetype> defaults();
  static Archetype from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

struct SyntheticStudent {
  std::string archetype;
  BktParams true_params = BktParams::defaults();
  bool latent_known = false;
  double hint_request_rate = 0.0;
  double low_effort_rate = 0.0;
  int confidence_bias = 0;
  std::uint64_t seed = 0;
};

// Gaussian perturbation of the archetype centre, clamped to [0.01, 0.99];
// slip + guess >= 1 is resampled a few times, then pulled toward the centre.
// Draws latent_known from the perturbed p_l0.
SyntheticStudent sample_student(const Archetype& archetype, double noise_sigma, SimRng& rng);

enum class ResponseKind { kCorrect, kWrong, kLowEffort, kHintRequest };
std::string_view to_string(ResponseKind k);

struct StudentResponse {
  ResponseKind kind = ResponseKind::kWrong;
  bool correct = false;
  bool will_request_hint = false;
  int confidence = 3;
  std::uint32_t response_ms = 0;
  bool learned = false;  // latent transition happened on this attempt
};

// One learner move. May flip student.latent_known (genuine learning).
StudentResponse student_respond(SyntheticStudent& student, std::optional<HintLevel> hint_received,
                                SimRng& rng);

// Simulated model-call costs; rule evaluation and template rendering are fixed.
struct LatencyProxy {
  double rule_evaluation_ms = 1.0;
  double template_render_ms = 2.0;
  double es_model_mean_ms = 622.0;
  double es_model_sd_ms = 90.0;
  double baseline_model_mean_ms = 800.0;
  double baseline_model_sd_ms = 150.0;
};

struct DialogueMetrics {
  double initial_mastery = 0.0;
  double final_mastery = 0.0;
  double measured_mastery_gain = 0.0;
  double latent_mastery_gain = 0.0;
  std::uint64_t hints_given = 0;
  double constraint_adherence = 1.0;
  double hint_efficiency = 0.0;
  std::uint64_t turns = 0;
  std::uint64_t prompt_tokens_total = 0;
  std::uint64_t latency_proxy_ms = 0;
};

double hint_efficiency(double measured_gain, std::uint64_t hints);
// Share of hint-relevant turns where both constraints passed; 1.0 when there were none.
double constraint_adherence(const std::vector<TurnTrace>& traces);

struct DialogueResult {
  DialogueMetrics metrics;
  std::vector<TurnTrace> traces;
};

struct DialogueSetup {
  std::string skill_id;
  std::vector<std::string> problem_ids;
  std::size_t max_turns = 30;
  LatencyProxy latency;
};

DialogueResult run_dialogue(const Orchestrator& orchestrator, PolicyKind policy,
                            const DialogueSetup& setup, SyntheticStudent student, SimRng& rng,
                            SimRng& latency_rng);

inline constexpr const char* kSimSkill = "sim_arithmetic";

// Synthetic problems for the Monte Carlo (answer, distractor, three hint levels).
std::shared_ptr<ContentStore> make_sim_content(std::size_t problems);

struct SimConfig {
  std::uint64_t seed = 42;
  std::size_t runs_per_archetype = 600;
  double noise_sigma = 0.05;
  std::size_t max_turns = 30;
  std::size_t problems_per_dialogue = 5;
  std::vector<PolicyKind> policies{PolicyKind::kEs, PolicyKind::kBaseline};
  std::vector<Archetype> archetypes = Archetype::defaults();
  LatencyProxy latency;
  PolicyConfig policy;
  unsigned threads = 1;  // not echoed: reports are identical for any value

  static SimConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

struct RunRecord {
  PolicyKind policy = PolicyKind::kEs;
  std::string archetype;
  std::size_t run_index = 0;
  std::uint64_t student_seed = 0;
  BktParams student_params = BktParams::defaults();
  bool initially_known = false;
  DialogueMetrics metrics;
};

struct PairedTest {
  std::string metric;
  Summary es;
  Summary baseline;
  WilcoxonResult wilcoxon;  // on es - baseline
};

struct SimulationReport {
  nlohmann::ordered_json config;
  std::vector<RunRecord> runs;
  std::vector<PairedTest> tests;

  std::vector<const RunRecord*> runs_for(PolicyKind policy,
                                         const std::string& archetype = {}) const;
  nlohmann::ordered_json to_json() const;
  static SimulationReport from_json(const nlohmann::ordered_json& j);
};

// Metric names carried in reports, in display order.
const std::vector<std::string>& metric_names();
double metric_value(const DialogueMetrics& m, const std::string& name);

// Sees every finished dialogue with its full trace. Calls are serialized but
// arrive in completion order when threads > 1.
using TraceObserver = std::function<void(const RunRecord&, const std::vector<TurnTrace>&)>;

SimulationReport run_monte_carlo(const SimConfig& config, const TraceObserver& observer = {});

// Pairs runs by (archetype, run_index) and tests es - baseline per metric.
std::vector<PairedTest> paired_tests(const std::vector<RunRecord>& es,
                                     const std::vector<RunRecord>& baseline);

// Total gain over total hints for a cohort (ratio of means, not mean of ratios).
double cohort_hint_efficiency(const std::vector<const RunRecord*>& runs);
// Mean of the per-run efficiencies; runs without hints count their full gain.
double mean_run_hint_efficiency(const std::vector<const RunRecord*>& runs);

std::string runs_to_csv(const SimulationReport& report);
// Comparison table: metric rows with es / baseline mean (sd) and p-values.
std::string format_comparison(const std::vector<PairedTest>& tests);

}  // namespace tutor::sim
