#include "tutor/policy_config.h"

#include <cctype>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tutor/errors.h"

namespace tutor {

PolicyConfig PolicyConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("", "policy config must be a JSON object");
  PolicyConfig c;
  auto read = [&](const char* key, auto& out) {
    if (doc.contains(key)) doc.at(key).get_to(out);
  };
  read("hint_cap", c.hint_cap);
  read("mastery_threshold", c.mastery_threshold);
  read("nudge_mastery_split", c.nudge_mastery_split);
  read("deep_remediation_after", c.deep_remediation_after);
  read("proactive_hint_error_streak", c.proactive_hint_error_streak);
  read("motivator_error_streak", c.motivator_error_streak);
  read("frustration_error_streak", c.frustration_error_streak);
  read("low_confidence_max", c.low_confidence_max);
  read("low_effort_lexicon", c.low_effort_lexicon);
  read("single_agent_mode", c.single_agent_mode);
  if (doc.contains("rolling_window")) doc.at("rolling_window").get_to(c.features.window);
  if (doc.contains("wheel_spin_threshold")) {
    doc.at("wheel_spin_threshold").get_to(c.features.wheel_spin_threshold);
  }
  if (doc.contains("default_bkt")) c.bkt = BktParamTable(bkt_params_from_json(doc.at("default_bkt")));
  if (doc.contains("skills")) {
    const BktParamTable table = BktParamTable::from_json(doc.at("skills"));
    for (const auto& [id, params] : table.entries()) c.bkt.set(id, params);
  }

  if (!(c.mastery_threshold >= 0.0 && c.mastery_threshold <= 1.0)) {
    throw ValidationError("mastery_threshold", "mastery_threshold must be in [0,1]");
  }
  if (!(c.nudge_mastery_split >= 0.0 && c.nudge_mastery_split <= 1.0)) {
    throw ValidationError("nudge_mastery_split", "nudge_mastery_split must be in [0,1]");
  }
  if (c.features.window == 0) throw ValidationError("rolling_window", "rolling_window must be >= 1");
  for (auto& word : c.low_effort_lexicon) word = normalize_input(word);
  return c;
}

PolicyConfig PolicyConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open policy config " + path.string());
  return from_json(nlohmann::json::parse(in));
}

nlohmann::json PolicyConfig::to_json() const {
  nlohmann::json skills = nlohmann::json::array();
  for (const auto& [id, params] : bkt.entries()) {
    nlohmann::json row = params;
    row["skill_id"] = id;
    skills.push_back(std::move(row));
  }
  nlohmann::json j = {
      {"hint_cap", hint_cap},
      {"mastery_threshold", mastery_threshold},
      {"nudge_mastery_split", nudge_mastery_split},
      {"deep_remediation_after", deep_remediation_after},
      {"proactive_hint_error_streak", proactive_hint_error_streak},
      {"motivator_error_streak", motivator_error_streak},
      {"frustration_error_streak", frustration_error_streak},
      {"low_confidence_max", low_confidence_max},
      {"low_effort_lexicon", low_effort_lexicon},
      {"single_agent_mode", single_agent_mode},
      {"rolling_window", features.window},
      {"wheel_spin_threshold", features.wheel_spin_threshold},
      {"default_bkt", bkt.fallback()},
      {"skills", std::move(skills)},
  };
  return j;
}

std::string PolicyConfig::hash() const { return fnv1a_hex(to_json().dump()); }

std::string normalize_input(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  // Curly apostrophes from mobile keyboards.
  for (std::size_t pos; (pos = out.find("\xE2\x80\x99")) != std::string::npos;) {
    out.replace(pos, 3, "'");
  }
  return out;
}

bool is_low_effort(std::string_view answer, const PolicyConfig& config) {
  const auto norm = normalize_input(answer);
  for (const auto& word : config.low_effort_lexicon) {
    if (norm == word) return true;
  }
  return false;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tutor
