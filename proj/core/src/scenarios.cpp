#include "tutor/scenarios.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace tutor {

namespace detail {
extern const char* const kEmbeddedScenarios;
}

std::vector<std::string> ScenarioSpec::problem_ids() const {
  std::vector<std::string> ids;
  for (const auto& p : problems) ids.push_back(p.problem_id);
  return ids;
}

namespace {

std::string required_string(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string() || j.at(key).get<std::string>().empty()) {
    throw ValidationError(key, where + ": '" + key + "' must be a non-empty string");
  }
  return j.at(key).get<std::string>();
}

Problem parse_problem(const nlohmann::json& j, const std::string& where) {
  Problem p;
  p.problem_id = required_string(j, "problem_id", where);
  const std::string at = where + "/" + p.problem_id;
  p.prompt = required_string(j, "prompt", at);
  p.answer = required_string(j, "answer", at);
  p.distractor = required_string(j, "distractor", at);
  if (answers_match(p.distractor, p.answer)) {
    throw ValidationError("distractor", at + ": distractor must differ from the answer");
  }
  if (!j.contains("hints") || !j.at("hints").is_object()) {
    throw ValidationError("hints", at + ": hints must be an object with MIN, MED and FULL");
  }
  for (const char* level : {"MIN", "MED", "FULL"}) {
    p.hints[hint_level_from_string(level)] = required_string(j.at("hints"), level, at + "/hints");
  }
  return p;
}

ScriptedMove parse_move(const nlohmann::json& j, const std::string& where) {
  ScriptedMove m;
  m.kind = input_kind_from_string(required_string(j, "kind", where));
  if (j.contains("answer")) m.answer = j.at("answer").get<std::string>();
  if (m.kind == InputKind::kAttempt && !m.answer) {
    throw ValidationError("answer", where + ": attempt moves need an answer");
  }
  if (j.contains("confidence")) {
    m.confidence = j.at("confidence").get<int>();
    if (*m.confidence < 1 || *m.confidence > 5) {
      throw ValidationError("confidence", where + ": confidence must be between 1 and 5");
    }
  }
  if (j.contains("response_ms")) m.response_ms = j.at("response_ms").get<std::uint32_t>();
  return m;
}

}  // namespace

ScenarioStore ScenarioStore::from_json(const nlohmann::json& doc) {
  ScenarioStore store;
  store.content_ = std::make_shared<ContentStore>();
  std::map<std::string, std::map<std::string, Problem>> bank;
  try {
    for (const auto& [skill, problems] : doc.at("skills").items()) {
      for (const auto& pj : problems) {
        Problem p = parse_problem(pj, "skills/" + skill);
        bank[skill][p.problem_id] = p;
        store.content_->add(skill, std::move(p));
      }
    }

    std::set<std::string> ids;
    for (const auto& sj : doc.at("scenarios")) {
      ScenarioSpec s;
      s.scenario_id = required_string(sj, "scenario_id", "scenarios");
      const std::string where = "scenarios/" + s.scenario_id;
      if (!ids.insert(s.scenario_id).second) {
        throw ValidationError("scenario_id", "duplicate scenario '" + s.scenario_id + "'");
      }
      s.signature = required_string(sj, "signature", where);
      s.signature_label = required_string(sj, "signature_label", where);
      s.authored_stand_in = sj.value("authored_stand_in", false);
      s.difficulty_tier = required_string(sj, "difficulty_tier", where);
      if (std::find(kTiers.begin(), kTiers.end(), s.difficulty_tier) == kTiers.end()) {
        throw ValidationError("difficulty_tier", where + ": unknown tier '" + s.difficulty_tier + "'");
      }
      s.skill_id = required_string(sj, "skill_id", where);
      s.description = sj.value("description", std::string());
      const auto skill = bank.find(s.skill_id);
      if (skill == bank.end()) {
        throw ValidationError("skill_id", where + ": no problems for skill '" + s.skill_id + "'");
      }
      for (const auto& pid : sj.at("problem_ids")) {
        const auto it = skill->second.find(pid.get<std::string>());
        if (it == skill->second.end()) {
          throw ValidationError("problem_ids", where + ": unknown problem '" + pid.get<std::string>() + "'");
        }
        s.problems.push_back(it->second);
      }
      if (s.problems.empty()) throw ValidationError("problem_ids", where + ": no problems");
      for (const auto& mj : sj.value("moves", nlohmann::json::array())) {
        s.moves.push_back(parse_move(mj, where));
      }
      store.scenarios_.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("scenarios", std::string("malformed scenario document: ") + e.what());
  }
  return store;
}

ScenarioStore ScenarioStore::embedded() {
  auto store = from_json(nlohmann::json::parse(detail::kEmbeddedScenarios));
  validate_suite(store);
  return store;
}

ScenarioStore ScenarioStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open scenario file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, "", path.string() + ": " + e.what());
  }
}

const ScenarioSpec& ScenarioStore::find(const std::string& id) const {
  for (const auto& s : scenarios_) {
    if (s.scenario_id == id) return s;
  }
  throw NotFoundError("unknown scenario '" + id + "'");
}

bool ScenarioStore::contains(const std::string& id) const {
  return std::any_of(scenarios_.begin(), scenarios_.end(),
                     [&](const ScenarioSpec& s) { return s.scenario_id == id; });
}

void validate_suite(const ScenarioStore& store) {
  const auto& all = store.all();
  if (all.size() != kSignatures.size() * kTiers.size()) {
    throw ValidationError("scenarios", "expected 24 scenarios, found " + std::to_string(all.size()));
  }
  std::set<std::pair<std::string, std::string>> cells;
  for (const auto& s : all) {
    if (std::find(kSignatures.begin(), kSignatures.end(), s.signature) == kSignatures.end()) {
      throw ValidationError("signature", s.scenario_id + ": unknown signature '" + s.signature + "'");
    }
    if (!cells.insert({s.signature, s.difficulty_tier}).second) {
      throw ValidationError("scenarios", "signature/tier cell covered twice: " + s.signature + "/" +
                                             s.difficulty_tier);
    }
    if (s.moves.empty()) throw ValidationError("moves", s.scenario_id + ": no scripted moves");
  }
}

nlohmann::json scenario_summary(const ScenarioSpec& s) {
  return {{"scenario_id", s.scenario_id},
          {"signature", s.signature},
          {"signature_label", s.signature_label},
          {"authored_stand_in", s.authored_stand_in},
          {"difficulty_tier", s.difficulty_tier},
          {"skill_id", s.skill_id},
          {"description", s.description},
          {"problem_count", s.problems.size()},
          {"scripted_moves", s.moves.size()}};
}

ReplayResult replay_scenario(const ScenarioSpec& spec, PolicyKind policy, const Orchestrator& orch) {
  if (spec.moves.empty()) {
    throw PreconditionError("scenario " + spec.scenario_id + " has no scripted moves");
  }
  ReplayResult out;
  out.scenario_id = spec.scenario_id;
  out.policy = policy;
  SessionState state = orch.start_session(spec.scenario_id + "-" + std::string(to_string(policy)),
                                          policy, spec.skill_id, spec.problem_ids(),
                                          spec.scenario_id, 0);
  out.metrics.initial_mastery = state.mastery.at(spec.skill_id).p_mastery;
  double latency = 0.0;

  for (const auto& move : spec.moves) {
    if (state.complete) break;
    const Problem& problem = orch.content().problem(spec.skill_id, state.current_problem());
    StudentInput in;
    in.kind = move.kind;
    if (move.answer) {
      if (*move.answer == kCorrectToken) in.answer = problem.answer;
      else if (*move.answer == kWrongToken) in.answer = problem.distractor;
      else in.answer = *move.answer;
    }
    in.confidence = move.confidence;
    in.response_ms = move.response_ms;

    TurnResult r = orch.process_turn(state, in);
    latency += r.trace.latency_ms;
    out.metrics.prompt_tokens_total += r.trace.prompt_token_count;
    if (r.trace.decision.delivered_hint()) ++out.metrics.hints_given;
    out.traces.push_back(std::move(r.trace));
    state = std::move(r.state);
  }

  out.transcript = state.history;
  auto& m = out.metrics;
  m.final_mastery = state.mastery.at(spec.skill_id).p_mastery;
  m.measured_mastery_gain = m.final_mastery - m.initial_mastery;
  m.constraint_adherence = sim::constraint_adherence(out.traces);
  m.hint_efficiency = sim::hint_efficiency(m.measured_mastery_gain, m.hints_given);
  m.turns = out.traces.size();
  m.latency_proxy_ms = static_cast<std::uint64_t>(std::llround(latency));
  return out;
}

nlohmann::json replay_to_json(const ReplayResult& r) {
  const auto& m = r.metrics;
  return {{"scenario_id", r.scenario_id},
          {"policy", to_string(r.policy)},
          {"transcript", r.transcript},
          {"metrics",
           {{"initial_mastery", m.initial_mastery},
            {"final_mastery", m.final_mastery},
            {"measured_mastery_gain", m.measured_mastery_gain},
            {"hints_given", m.hints_given},
            {"constraint_adherence", m.constraint_adherence},
            {"hint_efficiency", m.hint_efficiency},
            {"turns", m.turns},
            {"prompt_tokens_total", m.prompt_tokens_total},
            {"latency_proxy_ms", m.latency_proxy_ms}}}};
}

}  // namespace tutor
