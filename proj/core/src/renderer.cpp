#include "tutor/renderer.h"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tutor/errors.h"

namespace tutor {
namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
}

std::string param(const AgentProposal& a, const char* key) {
  auto it = a.params.find(key);
  return it == a.params.end() ? std::string() : it->second;
}

std::string skill_display(std::string skill) {
  for (char& c : skill) {
    if (c == '_') c = ' ';
  }
  return skill;
}

std::string fill_slots(std::string clause, const AgentProposal& action,
                       const RenderContext& context) {
  std::string hint_text = param(action, "hint_text");
  replace_all(hint_text, "{answer}", param(action, "answer"));
  replace_all(clause, "{hint_text}", hint_text);
  replace_all(clause, "{answer}", param(action, "answer"));
  replace_all(clause, "{skill}", skill_display(context.skill_id));
  return clause;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view to_string(RendererMode m) {
  switch (m) {
    case RendererMode::kTemplate: return "template";
    case RendererMode::kLlm: return "llm";
    case RendererMode::kFallback: return "fallback";
  }
  return "template";
}

RendererMode renderer_mode_from_string(std::string_view s) {
  if (s == "template") return RendererMode::kTemplate;
  if (s == "llm") return RendererMode::kLlm;
  if (s == "fallback") return RendererMode::kFallback;
  throw ValidationError("renderer", "unknown renderer mode '" + std::string(s) + "'");
}

RendererConfig RendererConfig::baseline() {
  RendererConfig c;
  c.max_tokens = 300;
  return c;
}

RendererConfig RendererConfig::from_json(const nlohmann::json& doc) {
  RendererConfig c;
  if (doc.contains("mode")) c.mode = renderer_mode_from_string(doc.at("mode").get<std::string>());
  if (doc.contains("model_name")) doc.at("model_name").get_to(c.model_name);
  if (doc.contains("temperature")) doc.at("temperature").get_to(c.temperature);
  if (doc.contains("max_tokens")) doc.at("max_tokens").get_to(c.max_tokens);
  if (doc.contains("endpoint")) doc.at("endpoint").get_to(c.endpoint);
  if (doc.contains("api_key_env")) doc.at("api_key_env").get_to(c.api_key_env);
  if (doc.contains("endpoint_env")) doc.at("endpoint_env").get_to(c.endpoint_env);
  if (doc.contains("timeout_ms")) doc.at("timeout_ms").get_to(c.timeout_ms);
  if (doc.contains("history_window")) doc.at("history_window").get_to(c.history_window);
  if (c.max_tokens <= 0) throw ValidationError("max_tokens", "max_tokens must be positive");
  return c;
}

nlohmann::json RendererConfig::to_json() const {
  return nlohmann::json{{"mode", to_string(mode)},          {"model_name", model_name},
                        {"temperature", temperature},       {"max_tokens", max_tokens},
                        {"endpoint", endpoint},             {"api_key_env", api_key_env},
                        {"endpoint_env", endpoint_env},     {"timeout_ms", timeout_ms},
                        {"history_window", history_window}};
}

TemplateSet TemplateSet::defaults() {
  TemplateSet t;
  t.clauses_ = {
      {"CONFIRM", "That's correct."},
      {"NUDGE", "Not quite. You usually get these, so look for a small slip."},
      {"REMEDIATE", "That's not right yet. Let's revisit the key idea in this {skill} step."},
      {"REMEDIATE_DEEP",
       "Let's try a different way of looking at it, with a concrete example of {skill}."},
      {"HINT_MIN", "Hint: {hint_text}"},
      {"HINT_MED", "A bigger hint: {hint_text}"},
      {"HINT_FULL", "Let's work through it together: {hint_text}"},
      {"DENY_HINT", "I need to see you try first. Give it your best attempt and I'll help from there."},
      {"DENY_HINT.hint_cap",
       "You've used all the hints for this problem. Try it with what you have so far."},
      {"ENCOURAGE", "Keep going, mistakes are part of learning this."},
      {"NEXT_PROBLEM", "You've mastered this, so let's move on to the next problem."},
  };
  t.rationales_ = {
      {"attempt_before_hint", "I need to see you try first..."},
      {"hint_cap", "Hint limit for this problem reached."},
      {"correct_answer", "Answer is correct."},
      {"likely_slip", "Incorrect, but mastery is high: likely a slip."},
      {"misconception", "Incorrect with low mastery: reteach the idea."},
      {"strategy_change", "Repeated remediation did not help: change strategy."},
      {"hint_requested", "Learner asked for a hint after trying."},
      {"error_streak", "Consecutive errors."},
      {"frustration", "Error pattern suggests frustration."},
      {"low_confidence", "Learner reported low confidence."},
      {"mastery_reached", "Mastery posterior above threshold."},
      {"single_agent_mode", "Muted by single-agent mode."},
      {"safety_guard", "Hint withheld by the runtime safety guard."},
  };
  t.empty_message_ = "Go ahead whenever you're ready.";
  return t;
}

TemplateSet TemplateSet::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("", "templates must be a JSON object");
  TemplateSet t = defaults();
  for (const auto& [key, value] : doc.items()) {
    if (key == "_empty") {
      t.empty_message_ = value.get<std::string>();
    } else if (key == "_rationales") {
      for (const auto& [rk, rv] : value.items()) t.rationales_[rk] = rv.get<std::string>();
    } else {
      const auto dot = key.find('.');
      action_from_string(key.substr(0, dot));  // validates the action name
      t.clauses_[key] = value.get<std::string>();
    }
  }
  return t;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open templates " + path.string());
  return from_json(nlohmann::json::parse(in));
}

const std::string& TemplateSet::clause_for(const AgentProposal& action) const {
  const std::string name(to_string(action.action));
  if (auto it = clauses_.find(name + "." + action.rationale_key); it != clauses_.end()) {
    return it->second;
  }
  if (auto it = clauses_.find(name); it != clauses_.end()) return it->second;
  throw ValidationError(name, "no template registered for action " + name);
}

std::string TemplateSet::rationale_text(const std::string& rationale_key) const {
  auto it = rationales_.find(rationale_key);
  return it == rationales_.end() ? rationale_key : it->second;
}

TemplateRendering render_template(const RenderRequest& request, const TemplateSet& templates) {
  TemplateRendering out;
  if (request.decisions.empty()) {
    out.text = templates.empty_message();
    return out;
  }
  for (const auto& action : request.decisions) {
    out.clauses.push_back(fill_slots(templates.clause_for(action), action, request.context));
  }
  for (std::size_t i = 0; i < out.clauses.size(); ++i) {
    if (i) out.text += ' ';
    out.text += out.clauses[i];
  }
  return out;
}

Prompt build_prompt(const RenderRequest& request, const RendererConfig& config) {
  nlohmann::ordered_json decisions = nlohmann::ordered_json::array();
  for (const auto& a : request.decisions) {
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : a.params) params[k] = v;  // std::map: sorted keys
    decisions.push_back({{"agent", to_string(a.agent)},
                         {"action", to_string(a.action)},
                         {"rationale_key", a.rationale_key},
                         {"params", std::move(params)}});
  }

  nlohmann::ordered_json constraints = nlohmann::ordered_json::object();
  for (const auto& c : request.context.constraints) {
    constraints[std::string(to_string(c.name))] = to_string(c.status);
  }

  const auto& hist = request.context.history;
  const std::size_t keep = std::min(hist.size(), config.history_window);
  nlohmann::ordered_json history = nlohmann::ordered_json::array();
  for (std::size_t i = hist.size() - keep; i < hist.size(); ++i) {
    history.push_back({{"speaker", hist[i].speaker}, {"text", hist[i].text}});
  }

  // Three decimals keep the prompt stable against last-bit noise.
  const double p = std::round(request.context.p_mastery * 1000.0) / 1000.0;

  nlohmann::ordered_json user = {
      {"decisions", std::move(decisions)},
      {"context",
       {{"skill_id", request.context.skill_id},
        {"p_mastery", p},
        {"attempt_count_problem", request.context.attempt_count_problem},
        {"hints_given_problem", request.context.hints_given_problem},
        {"constraint_state", std::move(constraints)},
        {"history", std::move(history)}}}};
  return Prompt{std::string(kRendererSystemMessage), user.dump()};
}

std::size_t count_tokens(std::string_view text) {
  std::size_t code_points = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++code_points;
  }
  return (code_points + 3) / 4;
}

std::size_t count_tokens(const Prompt& prompt) {
  return count_tokens(prompt.system) + count_tokens(prompt.user);
}

nlohmann::json chat_request_body(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  return nlohmann::json{{"model", request.model},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_tokens},
                        {"messages", std::move(messages)}};
}

std::string ScriptedChatClient::complete(const ChatRequest& request, const std::string&) {
  requests_.push_back(request);
  if (outcomes_.empty()) throw ChatError(ChatError::Kind::kTransport, "script exhausted");
  Outcome next = std::move(outcomes_.front());
  outcomes_.pop_front();
  if (next.error) {
    throw ChatError(*next.error, *next.error == ChatError::Kind::kTimeout ? "scripted timeout"
                                                                          : "scripted failure");
  }
  return next.text.value_or("");
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str()); v != nullptr) return std::string(v);
  return std::nullopt;
}

RenderOutcome render_llm(const RenderRequest& request, const RendererConfig& config,
                         ChatClient* client, const TemplateSet& templates, const EnvLookup& env) {
  RenderOutcome out;
  out.prompt = build_prompt(request, config);
  out.prompt_tokens = count_tokens(out.prompt);

  auto fall_back = [&](std::string why) {
    auto t = render_template(request, templates);
    out.text = std::move(t.text);
    out.clauses = std::move(t.clauses);
    out.mode = RendererMode::kFallback;
    out.failure = std::move(why);
    out.completion_tokens = count_tokens(out.text);
    return out;
  };

  const auto key = env ? env(config.api_key_env) : std::nullopt;
  if (!key || key->empty()) return fall_back("no_api_key");
  if (client == nullptr) return fall_back("no_client");

  ChatRequest req;
  req.model = config.model_name;
  req.temperature = config.temperature;
  req.max_tokens = config.max_tokens;
  req.timeout_ms = config.timeout_ms;
  req.messages = {{"system", out.prompt.system}, {"user", out.prompt.user}};
  try {
    auto text = trim(client->complete(req, *key));
    if (text.empty()) return fall_back("empty_completion");
    out.text = std::move(text);
    out.mode = RendererMode::kLlm;
    out.completion_tokens = count_tokens(out.text);
    return out;
  } catch (const ChatError& e) {
    switch (e.kind()) {
      case ChatError::Kind::kTimeout: return fall_back("timeout");
      case ChatError::Kind::kTransport: return fall_back(std::string("transport: ") + e.what());
      case ChatError::Kind::kBadResponse: return fall_back(std::string("bad_response: ") + e.what());
    }
  }
  return fall_back("unknown");
}

Renderer::Renderer(RendererConfig config, TemplateSet templates, std::shared_ptr<ChatClient> client,
                   EnvLookup env)
    : config_(std::move(config)),
      templates_(std::move(templates)),
      client_(std::move(client)),
      env_(std::move(env)) {}

RenderOutcome Renderer::render(const RenderRequest& request) const {
  if (config_.mode != RendererMode::kLlm) {
    RenderOutcome out;
    auto t = render_template(request, templates_);
    out.text = std::move(t.text);
    out.clauses = std::move(t.clauses);
    out.mode = RendererMode::kTemplate;
    // Accounted as if sent, so template runs still report prompt size.
    out.prompt = build_prompt(request, config_);
    out.prompt_tokens = count_tokens(out.prompt);
    out.completion_tokens = count_tokens(out.text);
    return out;
  }
  return render_llm(request, config_, client_.get(), templates_, env_);
}

void to_json(nlohmann::json& j, const DialogueTurn& t) {
  j = nlohmann::json{{"speaker", t.speaker}, {"text", t.text}};
}

void from_json(const nlohmann::json& j, DialogueTurn& t) {
  j.at("speaker").get_to(t.speaker);
  j.at("text").get_to(t.text);
}

}  // namespace tutor
