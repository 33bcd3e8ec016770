#include "tutor/service.h"

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>

namespace tutor {

namespace {

std::string new_session_id() {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(gen()),
                static_cast<unsigned long long>(gen()));
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_descriptor(const std::filesystem::path& path, const SessionDescriptor& d) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw TraceIoError("cannot write session descriptor " + tmp);
    out << nlohmann::json(d).dump() << '\n';
    if (!out) throw TraceIoError("cannot write session descriptor " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

TutorService::TutorService(std::shared_ptr<const Orchestrator> es,
                           std::shared_ptr<const Orchestrator> baseline,
                           std::shared_ptr<const ScenarioStore> scenarios,
                           std::filesystem::path data_dir)
    : es_(std::move(es)),
      baseline_(std::move(baseline)),
      scenarios_(std::move(scenarios)),
      data_dir_(std::move(data_dir)) {
  if (!es_ || !baseline_ || !scenarios_) throw PreconditionError("service needs orchestrators and scenarios");
  std::filesystem::create_directories(data_dir_);
}

nlohmann::json TutorService::problem_json(const SessionState& s) const {
  const Problem& p = orchestrator(s.policy).content().problem(s.skill_id, s.current_problem());
  return {{"problem_id", p.problem_id},
          {"prompt", p.prompt},
          {"skill_id", s.skill_id},
          {"index", s.problem_index},
          {"total", s.problem_ids.size()}};
}

nlohmann::json TutorService::create_session(const CreateSessionRequest& req) {
  SessionDescriptor d;
  d.session_id = new_session_id();
  d.policy = req.policy;
  d.created_at = utc_now();
  const Orchestrator& orch = orchestrator(req.policy);
  if (req.scenario_id) {
    const ScenarioSpec& spec = scenarios_->find(*req.scenario_id);
    d.scenario_id = spec.scenario_id;
    d.skill_id = spec.skill_id;
    d.problem_ids = spec.problem_ids();
  } else if (req.skill_id) {
    if (!orch.content().has_skill(*req.skill_id)) {
      throw NotFoundError("unknown skill '" + *req.skill_id + "'");
    }
    d.skill_id = *req.skill_id;
    for (const auto* p : orch.content().problems(d.skill_id)) d.problem_ids.push_back(p->problem_id);
  } else {
    throw ValidationError("scenario_id", "either scenario_id or skill_id is required");
  }

  auto session = std::make_shared<Session>();
  session->state = orch.start_session(d.session_id, d.policy, d.skill_id, d.problem_ids, d.scenario_id);
  session->descriptor = d;
  write_descriptor(descriptor_path(d.session_id), d);
  session->sink = std::make_unique<JsonlTraceSink>(trace_path(d.session_id));

  nlohmann::json out{{"session_id", d.session_id},
                     {"policy", to_string(d.policy)},
                     {"scenario_id", d.scenario_id ? nlohmann::json(*d.scenario_id) : nlohmann::json(nullptr)},
                     {"skill_id", d.skill_id},
                     {"created_at", d.created_at},
                     {"problem", problem_json(session->state)}};
  std::lock_guard lock(sessions_mu_);
  sessions_[d.session_id] = std::move(session);
  return out;
}

std::shared_ptr<TutorService::Session> TutorService::find(const std::string& id) {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

nlohmann::json TutorService::submit_turn(const std::string& session_id, const StudentInput& input) {
  auto session = find(session_id);
  std::lock_guard lock(session->mu);
  const Orchestrator& orch = orchestrator(session->state.policy);
  TurnResult r = orch.process_turn(session->state, input);
  // The trace is durable before the learner sees the response.
  const LogAck ack = log_turn(*session->sink, r.trace);
  session->state = std::move(r.state);

  const auto& templates = orch.renderer().templates();
  nlohmann::json badges = nlohmann::json::array();
  for (const auto& a : r.trace.decision.actions) {
    badges.push_back({{"agent", to_string(a.agent)},
                      {"action", to_string(a.action)},
                      {"rationale", a.rationale_key},
                      {"rationale_text", templates.rationale_text(a.rationale_key)}});
  }
  nlohmann::json out{{"message", r.trace.rendered_text},
                     {"badges", std::move(badges)},
                     {"constraint_checks", r.trace.decision.constraint_checks},
                     {"trace_id", ack.trace_id},
                     {"turn_index", ack.turn_index},
                     {"renderer_mode", to_string(r.trace.renderer_mode)},
                     {"session_complete", r.trace.session_complete},
                     {"problem", nullptr}};
  if (r.trace.next_problem_id) out["problem"] = problem_json(session->state);
  return out;
}

std::vector<TurnTrace> TutorService::get_traces(const std::string& session_id) {
  auto session = find(session_id);
  std::lock_guard lock(session->mu);
  const auto path = trace_path(session_id);
  if (!std::filesystem::exists(path)) return {};
  return read_traces(path);
}

nlohmann::json TutorService::list_scenarios() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : scenarios_->all()) out.push_back(scenario_summary(s));
  return out;
}

std::size_t TutorService::recover() {
  std::size_t loaded = 0;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir_)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".session.json";
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    std::ifstream in(entry.path());
    const SessionDescriptor d = nlohmann::json::parse(in).get<SessionDescriptor>();
    const auto traces = std::filesystem::exists(trace_path(d.session_id))
                            ? read_traces(trace_path(d.session_id))
                            : std::vector<TurnTrace>{};
    auto session = std::make_shared<Session>();
    session->descriptor = d;
    session->state = rebuild_session(orchestrator(d.policy), d, traces);
    session->sink = std::make_unique<JsonlTraceSink>(trace_path(d.session_id));
    std::lock_guard lock(sessions_mu_);
    sessions_[d.session_id] = std::move(session);
    ++loaded;
  }
  return loaded;
}

SessionState rebuild_session(const Orchestrator& orch, const SessionDescriptor& d,
                             const std::vector<TurnTrace>& traces) {
  SessionState state = orch.start_session(d.session_id, d.policy, d.skill_id, d.problem_ids, d.scenario_id);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const TurnTrace& logged = traces[i];
    if (logged.turn_index != i) {
      throw TraceIoError("session " + d.session_id + ": trace log has a gap at turn " + std::to_string(i));
    }
    TurnResult r = orch.process_turn(state, logged.input);
    if (!(r.trace.decision == logged.decision)) {
      throw TraceIoError("session " + d.session_id + ": replayed decision diverges at turn " +
                         std::to_string(i));
    }
    state = std::move(r.state);
    // Wording may come from a model; the log is authoritative for the transcript.
    state.history.back().text = logged.rendered_text;
  }
  return state;
}

void to_json(nlohmann::json& j, const SessionDescriptor& d) {
  j = nlohmann::json{{"session_id", d.session_id},
                     {"policy", to_string(d.policy)},
                     {"scenario_id", d.scenario_id ? nlohmann::json(*d.scenario_id) : nlohmann::json(nullptr)},
                     {"skill_id", d.skill_id},
                     {"problem_ids", d.problem_ids},
                     {"created_at", d.created_at}};
}

void from_json(const nlohmann::json& j, SessionDescriptor& d) {
  j.at("session_id").get_to(d.session_id);
  d.policy = policy_from_string(j.at("policy").get<std::string>());
  const auto& sc = j.at("scenario_id");
  d.scenario_id = sc.is_null() ? std::nullopt : std::optional<std::string>(sc.get<std::string>());
  j.at("skill_id").get_to(d.skill_id);
  j.at("problem_ids").get_to(d.problem_ids);
  j.at("created_at").get_to(d.created_at);
}

namespace {

const nlohmann::json* field(const nlohmann::json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return nullptr;
  return &body.at(key);
}

}  // namespace

StudentInput parse_turn_request(const nlohmann::json& body) {
  if (!body.is_object()) throw ValidationError("body", "request body must be a JSON object");
  StudentInput in;
  const auto* kind = field(body, "kind");
  if (!kind || !kind->is_string()) throw ValidationError("kind", "kind must be attempt, hint_request or chat");
  try {
    in.kind = input_kind_from_string(kind->get<std::string>());
  } catch (const Error&) {
    throw ValidationError("kind", "kind must be attempt, hint_request or chat");
  }
  if (const auto* a = field(body, "answer")) {
    if (!a->is_string()) throw ValidationError("answer", "answer must be a string");
    in.answer = a->get<std::string>();
  }
  if (in.kind == InputKind::kAttempt && !in.answer) {
    throw ValidationError("answer", "attempt inputs must carry an answer");
  }
  if (const auto* c = field(body, "confidence")) {
    if (!c->is_number_integer() || c->get<int>() < 1 || c->get<int>() > 5) {
      throw ValidationError("confidence", "confidence must be an integer between 1 and 5");
    }
    in.confidence = c->get<int>();
  }
  if (const auto* r = field(body, "response_ms")) {
    if (!r->is_number_unsigned()) throw ValidationError("response_ms", "response_ms must be a non-negative integer");
    in.response_ms = r->get<std::uint32_t>();
  }
  if (const auto* t = field(body, "timestamp_ms")) {
    if (!t->is_number_integer()) throw ValidationError("timestamp_ms", "timestamp_ms must be an integer");
    in.timestamp_ms = t->get<std::int64_t>();
  }
  return in;
}

CreateSessionRequest parse_create_request(const nlohmann::json& body) {
  if (!body.is_object()) throw ValidationError("body", "request body must be a JSON object");
  CreateSessionRequest req;
  if (const auto* p = field(body, "policy")) {
    if (!p->is_string()) throw ValidationError("policy", "policy must be 'es' or 'baseline'");
    req.policy = policy_from_string(p->get<std::string>());
  }
  if (const auto* s = field(body, "scenario_id")) {
    if (!s->is_string()) throw ValidationError("scenario_id", "scenario_id must be a string");
    req.scenario_id = s->get<std::string>();
  }
  if (const auto* s = field(body, "skill_id")) {
    if (!s->is_string()) throw ValidationError("skill_id", "skill_id must be a string");
    req.skill_id = s->get<std::string>();
  }
  if (req.scenario_id && req.skill_id) {
    throw ValidationError("skill_id", "give either scenario_id or skill_id, not both");
  }
  return req;
}

}  // namespace tutor
