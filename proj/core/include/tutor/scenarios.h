#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tutor/content.h"
#include "tutor/orchestrator.h"
#include "tutor/sim/simulation.h"

namespace tutor {

inline constexpr std::array<const char*, 8> kSignatures{
    "clean_correct", "hint_abuse",     "deep_struggle", "careless_slips",
    "fast_guesser",  "steady_improver", "help_avoider", "wheel_spinner"};
inline constexpr std::array<const char*, 3> kTiers{"easy", "medium", "hard"};

// Answer tokens in scripts: resolved against the problem on screen at replay time.
inline constexpr const char* kCorrectToken = "@correct";
inline constexpr const char* kWrongToken = "@wrong";

struct ScriptedMove {
  InputKind kind = InputKind::kAttempt;
  std::optional<std::string> answer;
  std::optional<int> confidence;
  std::optional<std::uint32_t> response_ms;
};

struct ScenarioSpec {
  std::string scenario_id;
  std::string signature;
  std::string signature_label;
  bool authored_stand_in = false;  // invented to fill the 8-signature grid
  std::string difficulty_tier;
  std::string skill_id;
  std::string description;
  std::vector<Problem> problems;
  std::vector<ScriptedMove> moves;

  std::vector<std::string> problem_ids() const;
};

class ScenarioStore {
 public:
  // The 24 shipped scenarios compiled into the library.
  static ScenarioStore embedded();
  // {"skills": {skill: [problem...]}, "scenarios": [...]}; every problem
  // needs an answer and all three hint levels.
  static ScenarioStore from_json(const nlohmann::json& doc);
  static ScenarioStore load(const std::filesystem::path& path);

  const std::vector<ScenarioSpec>& all() const { return scenarios_; }
  const ScenarioSpec& find(const std::string& scenario_id) const;
  bool contains(const std::string& scenario_id) const;
  std::shared_ptr<const ContentStore> content() const { return content_; }

 private:
  std::vector<ScenarioSpec> scenarios_;
  std::shared_ptr<ContentStore> content_;
};

// Exactly 24 scenarios covering every signature x tier cell once.
void validate_suite(const ScenarioStore& store);

nlohmann::json scenario_summary(const ScenarioSpec& spec);

struct ReplayResult {
  std::string scenario_id;
  PolicyKind policy = PolicyKind::kEs;
  std::vector<DialogueTurn> transcript;
  std::vector<TurnTrace> traces;
  sim::DialogueMetrics metrics;  // latent gain is not observable in a script and stays 0
};

// Deterministic scripted run. Stops early if the session completes.
ReplayResult replay_scenario(const ScenarioSpec& spec, PolicyKind policy,
                             const Orchestrator& orchestrator);

nlohmann::json replay_to_json(const ReplayResult& r);

}  // namespace tutor
