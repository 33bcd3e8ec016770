#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tutor/agents.h"

namespace tutor {

struct DialogueTurn {
  std::string speaker;  // "student" | "tutor"
  std::string text;

  friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

// Sanitized context: no learner or session identifiers.
struct RenderContext {
  std::string skill_id;
  double p_mastery = 0.0;
  std::uint32_t attempt_count_problem = 0;
  std::uint32_t hints_given_problem = 0;
  std::vector<ConstraintCheck> constraints;
  std::vector<DialogueTurn> history;
};

struct RenderRequest {
  std::vector<AgentProposal> decisions;
  RenderContext context;
};

enum class RendererMode { kTemplate, kLlm, kFallback };
std::string_view to_string(RendererMode m);
RendererMode renderer_mode_from_string(std::string_view s);

struct RendererConfig {
  RendererMode mode = RendererMode::kTemplate;
  std::string model_name = "gpt-4o-mini";
  double temperature = 0.3;
  int max_tokens = 120;
  std::string endpoint;
  std::string api_key_env = "TUTOR_LLM_API_KEY";
  std::string endpoint_env = "TUTOR_LLM_ENDPOINT";
  int timeout_ms = 10000;
  std::size_t history_window = 4;

  // The monolithic comparison tutor is allowed longer completions.
  static RendererConfig baseline();
  static RendererConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// action -> clause template with {hint_text}, {skill}, {answer} slots.
// A key of the form "ACTION.rationale_key" overrides the plain action key.
class TemplateSet {
 public:
  static TemplateSet defaults();
  static TemplateSet from_json(const nlohmann::json& doc);
  static TemplateSet load(const std::filesystem::path& path);

  // Throws ValidationError naming the action when no template is registered.
  const std::string& clause_for(const AgentProposal& action) const;
  const std::string& empty_message() const { return empty_message_; }
  // Human-readable reason shown on badges.
  std::string rationale_text(const std::string& rationale_key) const;

  void set(const std::string& key, std::string clause) { clauses_[key] = std::move(clause); }
  void erase(const std::string& key) { clauses_.erase(key); }

 private:
  std::map<std::string, std::string> clauses_;
  std::map<std::string, std::string> rationales_;
  std::string empty_message_;
};

struct TemplateRendering {
  std::vector<std::string> clauses;  // one per decision, in order
  std::string text;
};

TemplateRendering render_template(const RenderRequest& request,
                                  const TemplateSet& templates = TemplateSet::defaults());

struct Prompt {
  std::string system;
  std::string user;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

inline constexpr std::string_view kRendererSystemMessage =
    "You are the voice of a tutoring system. Compose a single response from the ordered "
    "decisions; do not change the decisions. Be concise.";

// The user message is canonical JSON with a fixed key order and only the
// last `config.history_window` dialogue turns.
Prompt build_prompt(const RenderRequest& request, const RendererConfig& config = {});

// ceil(code points / 4).
std::size_t count_tokens(std::string_view text);
std::size_t count_tokens(const Prompt& prompt);

// ---- chat-completion client ----

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  double temperature = 0.0;
  int max_tokens = 0;
  int timeout_ms = 0;
  std::vector<ChatMessage> messages;
};

nlohmann::json chat_request_body(const ChatRequest& request);

class ChatError : public std::runtime_error {
 public:
  enum class Kind { kTransport, kTimeout, kBadResponse };
  ChatError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Returns the completion text; throws ChatError on failure.
  virtual std::string complete(const ChatRequest& request, const std::string& api_key) = 0;
};

// Offline client that replays queued outcomes and records every request.
class ScriptedChatClient : public ChatClient {
 public:
  struct Outcome {
    std::optional<std::string> text;
    std::optional<ChatError::Kind> error;
  };

  void push_text(std::string text) { outcomes_.push_back({std::move(text), std::nullopt}); }
  void push_error(ChatError::Kind kind) { outcomes_.push_back({std::nullopt, kind}); }

  std::string complete(const ChatRequest& request, const std::string& api_key) override;

  const std::vector<ChatRequest>& requests() const { return requests_; }

 private:
  std::deque<Outcome> outcomes_;
  std::vector<ChatRequest> requests_;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

struct RenderOutcome {
  std::string text;
  std::vector<std::string> clauses;  // template clauses; empty for llm output
  RendererMode mode = RendererMode::kTemplate;
  std::string failure;  // why llm mode fell back, if it did
  Prompt prompt;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

// One chat-completion call; every failure degrades to the template wording.
RenderOutcome render_llm(const RenderRequest& request, const RendererConfig& config,
                         ChatClient* client, const TemplateSet& templates = TemplateSet::defaults(),
                         const EnvLookup& env = process_env);

class Renderer {
 public:
  Renderer(RendererConfig config = {}, TemplateSet templates = TemplateSet::defaults(),
           std::shared_ptr<ChatClient> client = nullptr, EnvLookup env = process_env);

  RenderOutcome render(const RenderRequest& request) const;

  const RendererConfig& config() const { return config_; }
  const TemplateSet& templates() const { return templates_; }

 private:
  RendererConfig config_;
  TemplateSet templates_;
  std::shared_ptr<ChatClient> client_;
  EnvLookup env_;
};

void to_json(nlohmann::json& j, const DialogueTurn& t);
void from_json(const nlohmann::json& j, DialogueTurn& t);

}  // namespace tutor
