#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tutor/knowledge_tracing.h"
#include "tutor/learner_features.h"

namespace tutor {

// Every agent threshold in one place. Loaded from the policy-config JSON;
// absent keys keep these defaults.
struct PolicyConfig {
  std::uint32_t hint_cap = 3;
  double mastery_threshold = kDefaultMasteryThreshold;
  // FeedbackBot: incorrect answers at or above this posterior read as slips.
  double nudge_mastery_split = 0.5;
  // FeedbackBot: consecutive REMEDIATEs on a problem before switching to REMEDIATE_DEEP.
  std::uint32_t deep_remediation_after = 2;
  std::uint32_t proactive_hint_error_streak = 2;
  std::uint32_t motivator_error_streak = 2;
  std::uint32_t frustration_error_streak = 3;
  int low_confidence_max = 2;
  std::vector<std::string> low_effort_lexicon = {"idk", "i don't know", "?", ""};
  // Keep only the highest-priority action per turn.
  bool single_agent_mode = false;
  FeatureConfig features;
  BktParamTable bkt;

  static PolicyConfig from_json(const nlohmann::json& doc);
  static PolicyConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Stable digest of the canonical JSON form; recorded in every trace.
  std::string hash() const;
};

// Lower-cased, whitespace-collapsed, trimmed input.
std::string normalize_input(std::string_view text);

bool is_low_effort(std::string_view answer, const PolicyConfig& config);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace tutor
