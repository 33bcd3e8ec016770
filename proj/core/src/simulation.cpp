#include "tutor/sim/simulation.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace tutor::sim {

double SimRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SimRng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

// ---- archetypes and students ----

namespace {

nlohmann::ordered_json params_json(const BktParams& p) {
  return {{"p_l0", p.p_l0()}, {"p_t", p.p_t()}, {"p_s", p.p_s()}, {"p_g", p.p_g()}};
}

template <class Json>
BktParams params_from(const Json& j) {
  return BktParams(j.at("p_l0").template get<double>(), j.at("p_t").template get<double>(),
                   j.at("p_s").template get<double>(), j.at("p_g").template get<double>());
}

}  // namespace

std::vector<Archetype> Archetype::defaults() {
  return {
      {"Struggling", BktParams(0.10, 0.05, 0.15, 0.15), 0.35, 0.20, -1},
      {"Low", BktParams(0.25, 0.08, 0.12, 0.18), 0.25, 0.10, -1},
      {"Average", BktParams(0.45, 0.12, 0.10, 0.20), 0.15, 0.05, 0},
      {"High", BktParams(0.70, 0.20, 0.05, 0.20), 0.05, 0.01, 1},
  };
}

Archetype Archetype::from_json(const nlohmann::json& j) {
  Archetype a{j.at("name").get<std::string>(), params_from(j.at("center")),
              j.at("hint_request_rate").get<double>(), j.at("low_effort_rate").get<double>(),
              j.value("confidence_bias", 0)};
  if (a.name.empty()) throw ValidationError("name", "archetype name must not be empty");
  for (auto [field, v] : {std::pair{"hint_request_rate", a.hint_request_rate},
                          std::pair{"low_effort_rate", a.low_effort_rate}}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(field, std::string(field) + " must be in [0,1]");
  }
  if (a.hint_request_rate + a.low_effort_rate > 1.0) {
    throw ValidationError("low_effort_rate", "hint_request_rate + low_effort_rate must not exceed 1");
  }
  if (a.confidence_bias < -2 || a.confidence_bias > 2) {
    throw ValidationError("confidence_bias", "confidence_bias must be in [-2, 2]");
  }
  return a;
}


nlohmann::ordered_json Archetype::to_json() const {
  return {{"name", name},
          {"center", params_json(center)},
          {"hint_request_rate", hint_request_rate},
          {"low_effort_rate", low_effort_rate},
          {"confidence_bias", confidence_bias}};
}

namespace {

double clamp_param(double v) { return std::clamp(v, 0.01, 0.99); }

constexpr int kResampleLimit = 16;

}  // namespace

SyntheticStudent sample_student(const Archetype& arch, double sigma, SimRng& rng) {
  if (!(sigma >= 0.0)) throw ValidationError("noise_sigma", "noise_sigma must be >= 0");
  const BktParams& c = arch.center;
  auto draw = [&](double centre) { return clamp_param(centre + sigma * rng.normal()); };

  double l0 = draw(c.p_l0());
  double t = draw(c.p_t());
  double s = draw(c.p_s());
  double g = draw(c.p_g());
  for (int i = 0; i < kResampleLimit && s + g >= 1.0; ++i) {
    s = draw(c.p_s());
    g = draw(c.p_g());
  }
  // Still invalid (centre near the boundary): move toward the centre, then
  // scale down if the centre itself sits on the edge.
  for (int i = 0; i < 64 && s + g >= 1.0; ++i) {
    s = clamp_param((s + c.p_s()) / 2.0);
    g = clamp_param((g + c.p_g()) / 2.0);
  }
  if (s + g >= 1.0) {
    const double k = 0.98 / (s + g);
    s = clamp_param(s * k);
    g = clamp_param(g * k);
  }

  SyntheticStudent st;
  st.archetype = arch.name;
  st.true_params = BktParams(l0, t, s, g);
  st.latent_known = rng.bernoulli(l0);
  st.hint_request_rate = arch.hint_request_rate;
  st.low_effort_rate = arch.low_effort_rate;
  st.confidence_bias = arch.confidence_bias;
  return st;
}

std::string_view to_string(ResponseKind k) {
  switch (k) {
    case ResponseKind::kCorrect: return "correct";
    case ResponseKind::kWrong: return "wrong";
    case ResponseKind::kLowEffort: return "low_effort";
    case ResponseKind::kHintRequest: return "hint_request";
  }
  return "wrong";
}

StudentResponse student_respond(SyntheticStudent& st, std::optional<HintLevel> hint, SimRng& rng) {
  StudentResponse r;
  const BktParams& p = st.true_params;
  // Fixed draw order keeps streams aligned: request, low effort, correctness,
  // learning, confidence, response time.
  const double u_request = rng.uniform();
  const double u_effort = rng.uniform();
  const double u_correct = rng.uniform();
  const double u_learn = rng.uniform();
  const double u_conf = rng.normal();
  const double u_time = rng.normal();

  // A learner holding an unused hint works with it instead of asking again,
  // and a worked solution leaves no reason for an "idk".
  r.will_request_hint = !hint && u_request < st.hint_request_rate;
  if (r.will_request_hint) {
    r.kind = ResponseKind::kHintRequest;
  } else if (hint != HintLevel::kFull && u_effort < st.low_effort_rate) {
    r.kind = ResponseKind::kLowEffort;
  } else {
    double p_correct;
    if (hint == HintLevel::kFull) {
      p_correct = 0.95;
    } else if (st.latent_known) {
      p_correct = 1.0 - p.p_s();
    } else {
      p_correct = p.p_g();
      if (hint == HintLevel::kMin) p_correct += 0.15;
      if (hint == HintLevel::kMed) p_correct += 0.35;
      p_correct = std::min(p_correct, 1.0);
    }
    r.correct = u_correct < p_correct;
    r.kind = r.correct ? ResponseKind::kCorrect : ResponseKind::kWrong;

    const bool self_driven = !hint || *hint == HintLevel::kMin;
    if (!st.latent_known && self_driven && u_learn < p.p_t()) {
      st.latent_known = true;
      r.learned = true;
    }
  }

  const double base = 3.0 + st.confidence_bias + (st.latent_known ? 0.5 : -0.5);
  r.confidence = static_cast<int>(std::clamp(std::lround(base + 0.8 * u_conf), 1L, 5L));
  r.response_ms = static_cast<std::uint32_t>(std::clamp(15000.0 + 5000.0 * u_time, 1000.0, 60000.0));
  return r;
}

// ---- dialogue ----

double hint_efficiency(double measured_gain, std::uint64_t hints) {
  return measured_gain / static_cast<double>(std::max<std::uint64_t>(hints, 1));
}

double constraint_adherence(const std::vector<TurnTrace>& traces) {
  std::size_t relevant = 0;
  std::size_t passing = 0;
  for (const auto& t : traces) {
    const auto& checks = t.decision.constraint_checks;
    const bool in_play = std::any_of(checks.begin(), checks.end(),
                                     [](const ConstraintCheck& c) { return c.hint_in_play; });
    if (!in_play) continue;
    ++relevant;
    if (std::all_of(checks.begin(), checks.end(),
                    [](const ConstraintCheck& c) { return c.passed(); })) {
      ++passing;
    }
  }
  return relevant == 0 ? 1.0 : static_cast<double>(passing) / static_cast<double>(relevant);
}

std::shared_ptr<ContentStore> make_sim_content(std::size_t problems) {
  auto store = std::make_shared<ContentStore>();
  for (std::size_t i = 1; i <= problems; ++i) {
    const int a = static_cast<int>(7 * i + 3);
    const int b = static_cast<int>(5 * i + 4);
    Problem p;
    p.problem_id = "p" + std::to_string(i);
    p.prompt = "What is " + std::to_string(a) + " + " + std::to_string(b) + "?";
    p.answer = std::to_string(a + b);
    p.distractor = std::to_string(a + b + 10);
    p.hints[HintLevel::kMin] = "Line up the ones and the tens before adding.";
    p.hints[HintLevel::kMed] = "Add the ones first: carry any ten into the tens column.";
    p.hints[HintLevel::kFull] = std::to_string(a) + " + " + std::to_string(b) + " = {answer}.";
    store->add(kSimSkill, std::move(p));
  }
  return store;
}

DialogueResult run_dialogue(const Orchestrator& orch, PolicyKind policy, const DialogueSetup& setup,
                            SyntheticStudent student, SimRng& rng, SimRng& latency_rng) {
  if (setup.max_turns < 1) throw ValidationError("max_turns", "max_turns must be >= 1");
  SessionState state = orch.start_session("sim-" + std::to_string(student.seed), policy,
                                          setup.skill_id, setup.problem_ids, std::nullopt,
                                          student.seed);
  DialogueResult out;
  out.metrics.initial_mastery = state.mastery.at(setup.skill_id).p_mastery;
  const bool known_at_start = student.latent_known;
  double latency = 0.0;

  while (!state.complete && out.traces.size() < setup.max_turns) {
    const auto resp = student_respond(student, state.pending_hint, rng);
    const Problem& problem = orch.content().problem(state.skill_id, state.current_problem());
    StudentInput in;
    switch (resp.kind) {
      case ResponseKind::kHintRequest: in.kind = InputKind::kHintRequest; break;
      case ResponseKind::kCorrect: in.answer = problem.answer; break;
      case ResponseKind::kWrong: in.answer = problem.distractor; break;
      case ResponseKind::kLowEffort: in.answer = "idk"; break;
    }
    in.confidence = resp.confidence;
    in.response_ms = resp.response_ms;
    in.timestamp_ms = state.clock_ms + resp.response_ms;

    TurnResult r = orch.process_turn(state, in);
    const LatencyProxy& lp = setup.latency;
    if (policy == PolicyKind::kEs) {
      latency += lp.rule_evaluation_ms + lp.template_render_ms +
                 std::max(0.0, lp.es_model_mean_ms + lp.es_model_sd_ms * latency_rng.normal());
    } else {
      latency += std::max(0.0, lp.baseline_model_mean_ms +
                                   lp.baseline_model_sd_ms * latency_rng.normal());
    }
    out.metrics.prompt_tokens_total += r.trace.prompt_token_count;
    if (r.trace.decision.delivered_hint()) ++out.metrics.hints_given;
    out.traces.push_back(std::move(r.trace));
    state = std::move(r.state);
  }

  DialogueMetrics& m = out.metrics;
  m.final_mastery = state.mastery.at(setup.skill_id).p_mastery;
  m.measured_mastery_gain = m.final_mastery - m.initial_mastery;
  m.latent_mastery_gain = (!known_at_start && student.latent_known) ? 1.0 : 0.0;
  m.constraint_adherence = constraint_adherence(out.traces);
  m.hint_efficiency = hint_efficiency(m.measured_mastery_gain, m.hints_given);
  m.turns = out.traces.size();
  m.latency_proxy_ms = static_cast<std::uint64_t>(std::llround(latency));
  return out;
}

// ---- config ----

SimConfig SimConfig::from_json(const nlohmann::json& j) {
  SimConfig c;
  c.seed = j.value("seed", c.seed);
  c.runs_per_archetype = j.value("runs_per_archetype", c.runs_per_archetype);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.max_turns = j.value("max_turns", c.max_turns);
  c.problems_per_dialogue = j.value("problems_per_dialogue", c.problems_per_dialogue);
  c.threads = j.value("threads", c.threads);
  if (j.contains("policies")) {
    c.policies.clear();
    for (const auto& p : j.at("policies")) c.policies.push_back(policy_from_string(p.get<std::string>()));
  }
  if (j.contains("archetypes")) {
    c.archetypes.clear();
    for (const auto& a : j.at("archetypes")) c.archetypes.push_back(Archetype::from_json(a));
  }
  if (j.contains("latency")) {
    const auto& l = j.at("latency");
    c.latency.rule_evaluation_ms = l.value("rule_evaluation_ms", c.latency.rule_evaluation_ms);
    c.latency.template_render_ms = l.value("template_render_ms", c.latency.template_render_ms);
    c.latency.es_model_mean_ms = l.value("es_model_mean_ms", c.latency.es_model_mean_ms);
    c.latency.es_model_sd_ms = l.value("es_model_sd_ms", c.latency.es_model_sd_ms);
    c.latency.baseline_model_mean_ms = l.value("baseline_model_mean_ms", c.latency.baseline_model_mean_ms);
    c.latency.baseline_model_sd_ms = l.value("baseline_model_sd_ms", c.latency.baseline_model_sd_ms);
  }
  if (j.contains("policy")) c.policy = PolicyConfig::from_json(j.at("policy"));

  if (c.runs_per_archetype < 1) throw ValidationError("runs_per_archetype", "runs_per_archetype must be >= 1");
  if (!(c.noise_sigma >= 0.0)) throw ValidationError("noise_sigma", "noise_sigma must be >= 0");
  if (c.max_turns < 1) throw ValidationError("max_turns", "max_turns must be >= 1");
  if (c.problems_per_dialogue < 1) throw ValidationError("problems_per_dialogue", "problems_per_dialogue must be >= 1");
  if (c.policies.empty()) throw ValidationError("policies", "at least one policy is required");
  if (c.archetypes.empty()) throw ValidationError("archetypes", "at least one archetype is required");
  return c;
}

nlohmann::ordered_json SimConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["runs_per_archetype"] = runs_per_archetype;
  j["noise_sigma"] = noise_sigma;
  j["max_turns"] = max_turns;
  j["problems_per_dialogue"] = problems_per_dialogue;
  j["policies"] = nlohmann::ordered_json::array();
  for (auto p : policies) j["policies"].push_back(to_string(p));
  j["archetypes"] = nlohmann::ordered_json::array();
  for (const auto& a : archetypes) j["archetypes"].push_back(a.to_json());
  j["latency"] = {{"rule_evaluation_ms", latency.rule_evaluation_ms},
                  {"template_render_ms", latency.template_render_ms},
                  {"es_model_mean_ms", latency.es_model_mean_ms},
                  {"es_model_sd_ms", latency.es_model_sd_ms},
                  {"baseline_model_mean_ms", latency.baseline_model_mean_ms},
                  {"baseline_model_sd_ms", latency.baseline_model_sd_ms}};
  j["policy_hash"] = policy.hash();
  return j;
}

// ---- metrics ----

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "measured_mastery_gain", "latent_mastery_gain", "hints_given",     "constraint_adherence",
      "hint_efficiency",       "turns",               "prompt_tokens_total", "latency_proxy_ms"};
  return names;
}

double metric_value(const DialogueMetrics& m, const std::string& name) {
  if (name == "measured_mastery_gain") return m.measured_mastery_gain;
  if (name == "latent_mastery_gain") return m.latent_mastery_gain;
  if (name == "hints_given") return static_cast<double>(m.hints_given);
  if (name == "constraint_adherence") return m.constraint_adherence;
  if (name == "hint_efficiency") return m.hint_efficiency;
  if (name == "turns") return static_cast<double>(m.turns);
  if (name == "prompt_tokens_total") return static_cast<double>(m.prompt_tokens_total);
  if (name == "latency_proxy_ms") return static_cast<double>(m.latency_proxy_ms);
  throw ValidationError("metric", "unknown metric '" + name + "'");
}

double cohort_hint_efficiency(const std::vector<const RunRecord*>& runs) {
  double gain = 0.0;
  std::uint64_t hints = 0;
  for (const auto* r : runs) {
    gain += r->metrics.measured_mastery_gain;
    hints += r->metrics.hints_given;
  }
  return hint_efficiency(gain, hints);
}

double mean_run_hint_efficiency(const std::vector<const RunRecord*>& runs) {
  std::vector<double> xs;
  xs.reserve(runs.size());
  for (const auto* r : runs) xs.push_back(r->metrics.hint_efficiency);
  return summarize(xs).mean;
}

std::vector<const RunRecord*> SimulationReport::runs_for(PolicyKind policy,
                                                         const std::string& archetype) const {
  std::vector<const RunRecord*> out;
  for (const auto& r : runs) {
    if (r.policy == policy && (archetype.empty() || r.archetype == archetype)) out.push_back(&r);
  }
  return out;
}

std::vector<PairedTest> paired_tests(const std::vector<RunRecord>& es,
                                     const std::vector<RunRecord>& baseline) {
  std::map<std::pair<std::string, std::size_t>, const RunRecord*> base_by_key;
  for (const auto& r : baseline) base_by_key[{r.archetype, r.run_index}] = &r;

  std::vector<std::pair<const RunRecord*, const RunRecord*>> pairs;
  for (const auto& r : es) {
    auto it = base_by_key.find({r.archetype, r.run_index});
    if (it == base_by_key.end()) continue;
    if (it->second->student_seed != r.student_seed) {
      throw ValidationError("student_seed", "runs " + r.archetype + "/" + std::to_string(r.run_index) +
                                                " used different students; reports are not paired");
    }
    pairs.emplace_back(&r, it->second);
  }
  if (pairs.empty()) throw ValidationError("runs", "no paired runs between the two policies");

  std::vector<PairedTest> out;
  for (const auto& name : metric_names()) {
    std::vector<double> a, b, d;
    for (const auto& [e, bl] : pairs) {
      a.push_back(metric_value(e->metrics, name));
      b.push_back(metric_value(bl->metrics, name));
      d.push_back(a.back() - b.back());
    }
    out.push_back(PairedTest{name, summarize(a), summarize(b), wilcoxon_signed_rank(d)});
  }
  return out;
}

SimulationReport run_monte_carlo(const SimConfig& config, const TraceObserver& observer) {
  const auto content = make_sim_content(config.problems_per_dialogue);
  const Orchestrator orch(config.policy, content);
  DialogueSetup setup;
  setup.skill_id = kSimSkill;
  for (const auto* p : content->problems(kSimSkill)) setup.problem_ids.push_back(p->problem_id);
  setup.max_turns = config.max_turns;
  setup.latency = config.latency;

  const std::size_t n_arch = config.archetypes.size();
  const std::size_t n_runs = config.runs_per_archetype;
  const std::size_t cells = n_arch * n_runs;
  const std::size_t n_pol = config.policies.size();
  std::vector<RunRecord> results(cells * n_pol);
  std::mutex observer_mu;

  auto work = [&](std::size_t cell) {
    const std::size_t a = cell / n_runs;
    const std::size_t run = cell % n_runs;
    const std::uint64_t student_seed = derive_seed(config.seed, a, run, 0);
    SimRng student_rng(student_seed);
    SyntheticStudent student = sample_student(config.archetypes[a], config.noise_sigma, student_rng);
    student.seed = student_seed;
    for (std::size_t pi = 0; pi < n_pol; ++pi) {
      const PolicyKind policy = config.policies[pi];
      const auto pid = static_cast<std::uint64_t>(policy);
      SimRng rng(derive_seed(config.seed, a, run, 1 + pid));
      SimRng latency_rng(derive_seed(config.seed, a, run, 101 + pid));
      DialogueResult d = run_dialogue(orch, policy, setup, student, rng, latency_rng);
      RunRecord& rec = results[pi * cells + cell];
      rec.policy = policy;
      rec.archetype = config.archetypes[a].name;
      rec.run_index = run;
      rec.student_seed = student_seed;
      rec.student_params = student.true_params;
      rec.initially_known = student.latent_known;
      rec.metrics = d.metrics;
      if (observer) {
        std::lock_guard lock(observer_mu);
        observer(rec, d.traces);
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(cells)));
  if (threads == 1) {
    for (std::size_t c = 0; c < cells; ++c) work(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) {
          try {
            work(c);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  SimulationReport report;
  report.config = config.to_json();
  report.runs = std::move(results);
  const auto has = [&](PolicyKind p) {
    return std::find(config.policies.begin(), config.policies.end(), p) != config.policies.end();
  };
  if (has(PolicyKind::kEs) && has(PolicyKind::kBaseline)) {
    std::vector<RunRecord> es, base;
    for (const auto& r : report.runs) (r.policy == PolicyKind::kEs ? es : base).push_back(r);
    report.tests = paired_tests(es, base);
  }
  return report;
}

// ---- serialization ----

namespace {

nlohmann::ordered_json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}};
}

Summary summary_from(const nlohmann::ordered_json& j) {
  return Summary{j.at("mean").get<double>(), j.at("sd").get<double>(), j.at("n").get<std::size_t>()};
}

nlohmann::ordered_json metrics_json(const DialogueMetrics& m) {
  return {{"initial_mastery", m.initial_mastery},
          {"final_mastery", m.final_mastery},
          {"measured_mastery_gain", m.measured_mastery_gain},
          {"latent_mastery_gain", m.latent_mastery_gain},
          {"hints_given", m.hints_given},
          {"constraint_adherence", m.constraint_adherence},
          {"hint_efficiency", m.hint_efficiency},
          {"turns", m.turns},
          {"prompt_tokens_total", m.prompt_tokens_total},
          {"latency_proxy_ms", m.latency_proxy_ms}};
}

DialogueMetrics metrics_from(const nlohmann::ordered_json& j) {
  DialogueMetrics m;
  j.at("initial_mastery").get_to(m.initial_mastery);
  j.at("final_mastery").get_to(m.final_mastery);
  j.at("measured_mastery_gain").get_to(m.measured_mastery_gain);
  j.at("latent_mastery_gain").get_to(m.latent_mastery_gain);
  j.at("hints_given").get_to(m.hints_given);
  j.at("constraint_adherence").get_to(m.constraint_adherence);
  j.at("hint_efficiency").get_to(m.hint_efficiency);
  j.at("turns").get_to(m.turns);
  j.at("prompt_tokens_total").get_to(m.prompt_tokens_total);
  j.at("latency_proxy_ms").get_to(m.latency_proxy_ms);
  return m;
}

nlohmann::ordered_json cohort_json(const std::vector<const RunRecord*>& runs) {
  nlohmann::ordered_json j;
  for (const auto& name : metric_names()) {
    std::vector<double> xs;
    for (const auto* r : runs) xs.push_back(metric_value(r->metrics, name));
    j[name] = summary_json(summarize(xs));
  }
  return j;
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

nlohmann::ordered_json SimulationReport::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = config;

  nlohmann::ordered_json aggregates;
  std::vector<std::string> policies;
  for (const auto& p : config.at("policies")) policies.push_back(p.get<std::string>());
  for (const auto& pname : policies) {
    const PolicyKind pk = policy_from_string(pname);
    nlohmann::ordered_json agg;
    agg["overall"] = cohort_json(runs_for(pk));
    agg["by_archetype"] = nlohmann::ordered_json::object();
    for (const auto& a : config.at("archetypes")) {
      const auto name = a.at("name").get<std::string>();
      agg["by_archetype"][name] = cohort_json(runs_for(pk, name));
    }
    aggregates[pname] = std::move(agg);
  }
  j["aggregates"] = std::move(aggregates);

  j["tests"] = nlohmann::ordered_json::array();
  for (const auto& t : tests) {
    j["tests"].push_back({{"metric", t.metric},
                          {"es", summary_json(t.es)},
                          {"baseline", summary_json(t.baseline)},
                          {"wilcoxon",
                           {{"n", t.wilcoxon.n},
                            {"statistic", t.wilcoxon.statistic},
                            {"w_plus", t.wilcoxon.w_plus},
                            {"p_value", t.wilcoxon.p_value},
                            {"method", t.wilcoxon.exact ? "exact" : "normal"},
                            {"degenerate", t.wilcoxon.degenerate}}}});
  }

  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : runs) {
    j["runs"].push_back({{"policy", to_string(r.policy)},
                         {"archetype", r.archetype},
                         {"run_index", r.run_index},
                         {"student_seed", r.student_seed},
                         {"student_params", params_json(r.student_params)},
                         {"initially_known", r.initially_known},
                         {"metrics", metrics_json(r.metrics)}});
  }
  return j;
}

SimulationReport SimulationReport::from_json(const nlohmann::ordered_json& j) {
  SimulationReport rep;
  try {
    rep.config = j.at("config");
    for (const auto& r : j.at("runs")) {
      RunRecord rec;
      rec.policy = policy_from_string(r.at("policy").get<std::string>());
      rec.archetype = r.at("archetype").get<std::string>();
      rec.run_index = r.at("run_index").get<std::size_t>();
      rec.student_seed = r.at("student_seed").get<std::uint64_t>();
      rec.student_params = params_from(r.at("student_params"));
      rec.initially_known = r.at("initially_known").get<bool>();
      rec.metrics = metrics_from(r.at("metrics"));
      rep.runs.push_back(std::move(rec));
    }
    for (const auto& t : j.value("tests", nlohmann::ordered_json::array())) {
      PairedTest pt;
      pt.metric = t.at("metric").get<std::string>();
      pt.es = summary_from(t.at("es"));
      pt.baseline = summary_from(t.at("baseline"));
      const auto& w = t.at("wilcoxon");
      pt.wilcoxon.n = w.at("n").get<std::size_t>();
      pt.wilcoxon.statistic = w.at("statistic").get<double>();
      pt.wilcoxon.w_plus = w.at("w_plus").get<double>();
      pt.wilcoxon.p_value = w.at("p_value").get<double>();
      pt.wilcoxon.exact = w.at("method").get<std::string>() == "exact";
      pt.wilcoxon.degenerate = w.at("degenerate").get<bool>();
      rep.tests.push_back(std::move(pt));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("report", std::string("malformed simulation report: ") + e.what());
  }
  return rep;
}

std::string runs_to_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "policy,archetype,run_index,student_seed,p_l0,p_t,p_s,p_g,initially_known,"
         "initial_mastery,final_mastery";
  for (const auto& name : metric_names()) out << ',' << name;
  out << '\n';
  for (const auto& r : report.runs) {
    const auto& p = r.student_params;
    out << to_string(r.policy) << ',' << r.archetype << ',' << r.run_index << ',' << r.student_seed
        << ',' << fmt_double(p.p_l0()) << ',' << fmt_double(p.p_t()) << ',' << fmt_double(p.p_s())
        << ',' << fmt_double(p.p_g()) << ',' << (r.initially_known ? 1 : 0) << ','
        << fmt_double(r.metrics.initial_mastery) << ',' << fmt_double(r.metrics.final_mastery);
    for (const auto& name : metric_names()) out << ',' << fmt_double(metric_value(r.metrics, name));
    out << '\n';
  }
  return out.str();
}

std::string format_comparison(const std::vector<PairedTest>& tests) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %20s %20s %12s %6s\n", "metric", "es mean (sd)",
                "baseline mean (sd)", "p (wilcoxon)", "n");
  out += line;
  for (const auto& t : tests) {
    char es[32], bl[32];
    std::snprintf(es, sizeof es, "%.3f (%.3f)", t.es.mean, t.es.sd);
    std::snprintf(bl, sizeof bl, "%.3f (%.3f)", t.baseline.mean, t.baseline.sd);
    std::snprintf(line, sizeof line, "%-24s %20s %20s %12.3g %6zu%s\n", t.metric.c_str(), es, bl,
                  t.wilcoxon.p_value, t.wilcoxon.n, t.wilcoxon.degenerate ? " (all ties)" : "");
    out += line;
  }
  return out;
}

}  // namespace tutor::sim
