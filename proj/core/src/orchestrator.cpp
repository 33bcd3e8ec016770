#include "tutor/orchestrator.h"

#include <algorithm>
#include <chrono>

#include <nlohmann/json.hpp>

#include "tutor/baseline.h"

namespace tutor {

bool TurnDecision::contains(ActionType a) const {
  return std::any_of(actions.begin(), actions.end(),
                     [a](const AgentProposal& p) { return p.action == a; });
}

std::optional<ActionType> TurnDecision::delivered_hint() const {
  for (const auto& p : actions) {
    if (is_hint_delivery(p.action)) return p.action;
  }
  return std::nullopt;
}

const ConstraintCheck& TurnDecision::check(ConstraintName name) const {
  for (const auto& c : constraint_checks) {
    if (c.name == name) return c;
  }
  throw NotFoundError("decision has no check for " + std::string(to_string(name)));
}

std::vector<ConstraintCheck> audit_constraints(const std::vector<AgentProposal>& actions,
                                               const LearnerSnapshot& s,
                                               const PolicyConfig& config, bool hint_in_play) {
  const bool delivered =
      std::any_of(actions.begin(), actions.end(),
                  [](const AgentProposal& p) { return is_hint_delivery(p.action); });
  const bool in_play = hint_in_play || delivered;

  auto check = [&](ConstraintName name, bool breach) {
    ConstraintCheck c;
    c.name = name;
    c.hint_in_play = in_play;
    if (delivered && breach) c.status = ConstraintStatus::kViolated;
    else if (in_play && breach) c.status = ConstraintStatus::kBlocked;
    else c.status = ConstraintStatus::kSatisfied;
    c.attempt_count_problem = s.attempt_count_problem;
    c.genuine_attempts = s.genuine_attempts();
    c.hints_given_problem = s.hints_given_problem;
    c.hint_cap = config.hint_cap;
    return c;
  };
  return {check(ConstraintName::kAttemptBeforeHint, s.genuine_attempts() == 0),
          check(ConstraintName::kHintCap, s.hints_given_problem >= config.hint_cap)};
}

TurnDecision arbitrate(const std::vector<AgentProposal>& proposals, const LearnerSnapshot& s,
                       const PolicyConfig& config) {
  TurnDecision d;
  const AgentProposal* deny = nullptr;
  for (const auto& p : proposals) {
    if (p.action == ActionType::kDenyHint) {
      deny = &p;
      break;
    }
  }
  const std::string deny_reason =
      deny ? (deny->params.count("reason") ? deny->params.at("reason") : deny->rationale_key) : "";

  bool hint_in_play = s.last_input_kind == InputKind::kHintRequest;
  std::vector<AgentProposal> survivors;
  for (const auto& p : proposals) {
    hint_in_play = hint_in_play || is_hint_delivery(p.action);
    if (deny && is_hint_delivery(p.action)) {
      d.suppressed.push_back({p, deny_reason});
    } else if (p.action == ActionType::kDenyHint && &p != deny) {
      d.suppressed.push_back({p, "duplicate_agent"});
    } else {
      survivors.push_back(p);
    }
  }

  std::stable_sort(survivors.begin(), survivors.end(),
                   [](const AgentProposal& a, const AgentProposal& b) {
                     return priority_rank(a.agent) < priority_rank(b.agent);
                   });
  for (auto& p : survivors) {
    const bool seen = std::any_of(d.actions.begin(), d.actions.end(),
                                  [&](const AgentProposal& q) { return q.agent == p.agent; });
    if (seen) d.suppressed.push_back({std::move(p), "duplicate_agent"});
    else d.actions.push_back(std::move(p));
  }

  // Runtime guard: the ensemble never gets here with a violating hint, but a
  // hand-built proposal list can.
  const bool no_attempt = s.genuine_attempts() == 0;
  const bool at_cap = s.hints_given_problem >= config.hint_cap;
  if (no_attempt || at_cap) {
    const auto reason = no_attempt ? ConstraintName::kAttemptBeforeHint : ConstraintName::kHintCap;
    bool stripped = false;
    for (auto it = d.actions.begin(); it != d.actions.end();) {
      if (is_hint_delivery(it->action)) {
        d.safety_incidents.push_back(std::string(to_string(it->action)) + " stripped: " +
                                     std::string(to_string(reason)));
        d.suppressed.push_back({*it, "safety_guard"});
        it = d.actions.erase(it);
        stripped = true;
      } else {
        ++it;
      }
    }
    if (stripped && !d.contains(ActionType::kDenyHint)) {
      d.actions.insert(d.actions.begin(),
                       AgentProposal{AgentId::kEthics, ActionType::kDenyHint,
                                     std::string(to_string(reason)),
                                     {{"reason", std::string(to_string(reason))}}});
    }
  }

  if (config.single_agent_mode && d.actions.size() > 1) {
    for (std::size_t i = 1; i < d.actions.size(); ++i) {
      d.suppressed.push_back({d.actions[i], "single_agent_mode"});
    }
    d.actions.resize(1);
  }

  d.constraint_checks = audit_constraints(d.actions, s, config, hint_in_play);
  return d;
}

std::string_view to_string(PolicyKind p) { return p == PolicyKind::kEs ? "es" : "baseline"; }

PolicyKind policy_from_string(std::string_view s) {
  if (s == "es") return PolicyKind::kEs;
  if (s == "baseline") return PolicyKind::kBaseline;
  throw ValidationError("policy", "policy must be 'es' or 'baseline', got '" + std::string(s) + "'");
}

// ---- orchestrator ----

namespace {

constexpr std::int64_t kDefaultTurnMs = 10000;
constexpr std::uint32_t kDefaultResponseMs = 10000;

std::string student_utterance(const StudentInput& in) {
  switch (in.kind) {
    case InputKind::kAttempt: return in.answer.value_or("");
    case InputKind::kHintRequest: return in.answer.value_or("Can I have a hint?");
    case InputKind::kChat: return in.answer.value_or("");
  }
  return {};
}

}  // namespace

Orchestrator::Orchestrator(PolicyConfig config, std::shared_ptr<const ContentStore> content,
                           Renderer renderer)
    : config_(std::move(config)),
      policy_hash_(config_.hash()),
      content_(std::move(content)),
      renderer_(std::move(renderer)) {
  if (!content_) throw PreconditionError("orchestrator needs a content store");
}

SessionState Orchestrator::start_session(std::string session_id, PolicyKind policy,
                                         std::string skill_id,
                                         std::vector<std::string> problem_ids,
                                         std::optional<std::string> scenario_id,
                                         std::uint64_t seed) const {
  if (problem_ids.empty()) throw PreconditionError("a session needs at least one problem");
  for (const auto& pid : problem_ids) content_->problem(skill_id, pid);  // throws NotFound

  SessionState s;
  s.session_id = std::move(session_id);
  s.policy = policy;
  s.scenario_id = std::move(scenario_id);
  s.skill_id = std::move(skill_id);
  s.problem_ids = std::move(problem_ids);
  s.features = LearnerFeatureState(config_.features);
  s.features.enter_problem(s.problem_ids.front());
  s.mastery.emplace(s.skill_id, SkillMastery::initial(s.skill_id, config_.bkt.get(s.skill_id)));
  s.seed = seed;
  return s;
}

TurnResult Orchestrator::process_turn(const SessionState& state, const StudentInput& input) const {
  if (state.complete) throw PreconditionError("session " + state.session_id + " is complete");
  if (input.kind == InputKind::kAttempt && !input.answer) {
    throw ValidationError("answer", "attempt inputs must carry an answer");
  }
  if (input.confidence && (*input.confidence < 1 || *input.confidence > 5)) {
    throw ValidationError("confidence", "confidence must be between 1 and 5");
  }

  SessionState s = state;
  const std::int64_t now = input.timestamp_ms.value_or(s.clock_ms + kDefaultTurnMs);
  s.clock_ms = std::max(now, s.clock_ms);
  const std::string problem_id = s.current_problem();
  const Problem& problem = content_->problem(s.skill_id, problem_id);
  const BktParams& params = config_.bkt.get(s.skill_id);
  SkillMastery& mastery = s.mastery.at(s.skill_id);

  // Features and assessment.
  std::optional<bool> correct;
  bool low_effort = false;
  if (input.kind == InputKind::kAttempt) {
    low_effort = is_low_effort(*input.answer, config_);
    correct = !low_effort && answers_match(*input.answer, problem.answer);
    ++s.attempt_count_problem;
    if (low_effort) ++s.low_effort_attempts_problem;
    if (!*correct) ++s.errors_problem;
    s.features.observe_attempt(s.skill_id, problem_id, s.clock_ms,
                               input.response_ms.value_or(kDefaultResponseMs), *correct,
                               s.hints_given_problem > 0);
    mastery = bkt_update(mastery, params, *correct);
    s.pending_hint.reset();
  }

  LearnerSnapshot snap;
  snap.skill_id = s.skill_id;
  snap.problem_id = problem_id;
  snap.features = s.features.snapshot(s.skill_id, s.clock_ms,
                                      is_mastered(mastery.p_mastery, config_.mastery_threshold));
  snap.mastery = mastery;
  snap.attempt_count_problem = s.attempt_count_problem;
  snap.low_effort_attempts_problem = s.low_effort_attempts_problem;
  snap.errors_problem = s.errors_problem;
  snap.hints_given_problem = s.hints_given_problem;
  snap.remediation_streak = s.remediation_streak;
  snap.last_correct = correct;
  snap.last_low_effort = low_effort;
  snap.confidence = input.confidence;
  snap.last_input_kind = input.kind;
  snap.affect = detect_affect(snap, config_);

  // Decide.
  std::vector<AgentProposal> proposals;
  TurnDecision decision;
  if (s.policy == PolicyKind::kEs) {
    auto ensemble = run_ensemble(snap, config_);
    proposals = ensemble.proposals;
    decision = arbitrate(ensemble.proposals, snap, config_);
  } else {
    decision = baseline_policy_step(snap, config_);
    proposals = decision.actions;
  }

  // Domain-expert content for hint actions.
  for (auto& a : decision.actions) {
    if (auto level = hint_level_of(a.action)) {
      const auto hint = content_->resolve_hint(s.skill_id, problem_id, *level);
      a.params["hint_key"] = hint.key;
      a.params["hint_text"] = hint.text;
      if (*level == HintLevel::kFull) a.params["answer"] = problem.answer;
    }
  }

  // Render against the pre-advance state the learner just acted on.
  RenderRequest request;
  request.decisions = decision.actions;
  request.context.skill_id = s.skill_id;
  request.context.p_mastery = mastery.p_mastery;
  request.context.attempt_count_problem = s.attempt_count_problem;
  request.context.hints_given_problem = s.hints_given_problem;
  request.context.constraints = decision.constraint_checks;
  request.context.history = s.history;
  request.context.history.push_back({"student", student_utterance(input)});

  const auto started = std::chrono::steady_clock::now();
  RenderOutcome rendered = renderer_.render(request);
  const auto elapsed = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();

  std::size_t prompt_tokens = rendered.prompt_tokens;
  if (s.policy == PolicyKind::kBaseline) {
    prompt_tokens =
        count_tokens(build_monolithic_prompt(problem, s.history, student_utterance(input)));
  }

  // Apply effects.
  for (const auto& a : decision.actions) {
    if (auto level = hint_level_of(a.action)) {
      ++s.hints_given_problem;
      s.features.observe_hint(s.skill_id, problem_id, s.clock_ms);
      s.pending_hint = *level;
    }
    if (a.action == ActionType::kRemediate || a.action == ActionType::kRemediateDeep) {
      ++s.remediation_streak;
    } else if (a.action == ActionType::kConfirm || a.action == ActionType::kNudge) {
      s.remediation_streak = 0;
    }
  }

  TurnTrace trace;
  if (decision.contains(ActionType::kNextProblem)) {
    ++s.problem_index;
    s.attempt_count_problem = 0;
    s.low_effort_attempts_problem = 0;
    s.errors_problem = 0;
    s.hints_given_problem = 0;
    s.remediation_streak = 0;
    s.pending_hint.reset();
    if (s.problem_index >= s.problem_ids.size()) {
      s.complete = true;
      s.problem_index = s.problem_ids.size() - 1;
    } else {
      s.features.enter_problem(s.current_problem());
      trace.next_problem_id = s.current_problem();
    }
  }

  s.history.push_back({"student", student_utterance(input)});
  s.history.push_back({"tutor", rendered.text});

  trace.turn_index = s.turn_index;
  trace.session_id = s.session_id;
  trace.policy = s.policy;
  trace.policy_hash = policy_hash_;
  trace.input = input;
  trace.problem_id = problem_id;
  trace.snapshot = std::move(snap);
  trace.proposals = std::move(proposals);
  trace.decision = std::move(decision);
  trace.rendered_text = rendered.text;
  trace.renderer_mode = rendered.mode;
  trace.renderer_failure = rendered.failure;
  trace.prompt_token_count = prompt_tokens;
  trace.completion_token_count = rendered.completion_tokens;
  trace.latency_ms = rendered.mode == RendererMode::kTemplate
                         ? latency_.rule_evaluation_ms + latency_.template_render_ms
                         : latency_.rule_evaluation_ms + elapsed;
  trace.rng_seed_state = s.seed;
  trace.session_complete = s.complete;

  ++s.turn_index;
  return TurnResult{std::move(trace), std::move(s)};
}

// ---- persistence ----

JsonlTraceSink::JsonlTraceSink(std::filesystem::path path) : path_(std::move(path)) {
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw TraceIoError("cannot open trace sink " + path_.string());
}

void JsonlTraceSink::append(const TurnTrace& trace) {
  const std::string line = trace_to_jsonl(trace);
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw TraceIoError("write failed on trace sink " + path_.string());
}

void MemoryTraceSink::append(const TurnTrace& trace) {
  std::lock_guard lock(mu_);
  traces_.push_back(trace);
}

std::vector<TurnTrace> MemoryTraceSink::traces() const {
  std::lock_guard lock(mu_);
  return traces_;
}

LogAck log_turn(TraceSink& sink, const TurnTrace& trace) {
  sink.append(trace);
  return LogAck{trace.turn_index, trace.trace_id()};
}

std::string trace_to_jsonl(const TurnTrace& trace) {
  nlohmann::json j = trace;
  return j.dump() + "\n";
}

std::vector<TurnTrace> read_traces(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceIoError("cannot read trace file " + path.string());
  std::vector<TurnTrace> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<TurnTrace>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, "", std::string("bad trace record: ") + e.what());
    }
  }
  return out;
}

// ---- JSON ----

void to_json(nlohmann::json& j, const StudentInput& in) {
  j = nlohmann::json{{"kind", to_string(in.kind)}};
  j["answer"] = in.answer ? nlohmann::json(*in.answer) : nlohmann::json(nullptr);
  j["confidence"] = in.confidence ? nlohmann::json(*in.confidence) : nlohmann::json(nullptr);
  j["timestamp_ms"] = in.timestamp_ms ? nlohmann::json(*in.timestamp_ms) : nlohmann::json(nullptr);
  j["response_ms"] = in.response_ms ? nlohmann::json(*in.response_ms) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, StudentInput& in) {
  in.kind = input_kind_from_string(j.at("kind").get<std::string>());
  auto opt = [&](const char* key, auto& out) {
    using T = typename std::decay_t<decltype(out)>::value_type;
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
    else out.reset();
  };
  opt("answer", in.answer);
  opt("confidence", in.confidence);
  opt("timestamp_ms", in.timestamp_ms);
  opt("response_ms", in.response_ms);
}

void to_json(nlohmann::json& j, const TurnDecision& d) {
  nlohmann::json suppressed = nlohmann::json::array();
  for (const auto& s : d.suppressed) {
    suppressed.push_back({{"proposal", s.proposal}, {"reason", s.reason}});
  }
  j = nlohmann::json{{"actions", d.actions},
                     {"suppressed", std::move(suppressed)},
                     {"constraint_checks", d.constraint_checks},
                     {"safety_incidents", d.safety_incidents}};
}

void from_json(const nlohmann::json& j, TurnDecision& d) {
  j.at("actions").get_to(d.actions);
  d.suppressed.clear();
  for (const auto& s : j.at("suppressed")) {
    d.suppressed.push_back({s.at("proposal").get<AgentProposal>(), s.at("reason").get<std::string>()});
  }
  j.at("constraint_checks").get_to(d.constraint_checks);
  d.safety_incidents = j.value("safety_incidents", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const TurnTrace& t) {
  j = nlohmann::json{{"turn_index", t.turn_index},
                     {"session_id", t.session_id},
                     {"policy", to_string(t.policy)},
                     {"policy_hash", t.policy_hash},
                     {"input", t.input},
                     {"problem_id", t.problem_id},
                     {"snapshot", t.snapshot},
                     {"proposals", t.proposals},
                     {"decision", t.decision},
                     {"rendered_text", t.rendered_text},
                     {"renderer_mode", to_string(t.renderer_mode)},
                     {"renderer_failure", t.renderer_failure},
                     {"prompt_token_count", t.prompt_token_count},
                     {"completion_token_count", t.completion_token_count},
                     {"latency_ms", t.latency_ms},
                     {"rng_seed_state", t.rng_seed_state},
                     {"next_problem_id", nullptr},
                     {"session_complete", t.session_complete}};
  if (t.next_problem_id) j["next_problem_id"] = *t.next_problem_id;
}

void from_json(const nlohmann::json& j, TurnTrace& t) {
  j.at("turn_index").get_to(t.turn_index);
  j.at("session_id").get_to(t.session_id);
  t.policy = policy_from_string(j.at("policy").get<std::string>());
  j.at("policy_hash").get_to(t.policy_hash);
  j.at("input").get_to(t.input);
  j.at("problem_id").get_to(t.problem_id);
  j.at("snapshot").get_to(t.snapshot);
  j.at("proposals").get_to(t.proposals);
  j.at("decision").get_to(t.decision);
  j.at("rendered_text").get_to(t.rendered_text);
  t.renderer_mode = renderer_mode_from_string(j.at("renderer_mode").get<std::string>());
  t.renderer_failure = j.value("renderer_failure", std::string());
  j.at("prompt_token_count").get_to(t.prompt_token_count);
  j.at("completion_token_count").get_to(t.completion_token_count);
  j.at("latency_ms").get_to(t.latency_ms);
  j.at("rng_seed_state").get_to(t.rng_seed_state);
  const auto& next = j.at("next_problem_id");
  t.next_problem_id = next.is_null() ? std::nullopt : std::optional<std::string>(next.get<std::string>());
  j.at("session_complete").get_to(t.session_complete);
}

}  // namespace tutor
