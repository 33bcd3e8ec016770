#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace tutor {

// Classical two-state BKT parameters for one skill.
//
// Construction rejects anything outside [0,1] and any slip/guess pair with
// p_s + p_g >= 1, where a correct answer would stop being evidence of mastery.
class BktParams {
 public:
  BktParams(double p_l0, double p_t, double p_s, double p_g);

  // Mid-range values used when a skill has no fitted parameters.
  static BktParams defaults();

  double p_l0() const { return p_l0_; }
  double p_t() const { return p_t_; }
  double p_s() const { return p_s_; }
  double p_g() const { return p_g_; }

  friend bool operator==(const BktParams&, const BktParams&) = default;

 private:
  double p_l0_;
  double p_t_;
  double p_s_;
  double p_g_;
};

struct SkillMastery {
  std::string skill_id;
  double p_mastery = 0.0;
  std::uint32_t opportunity_count = 0;

  static SkillMastery initial(std::string skill_id, const BktParams& params);

  friend bool operator==(const SkillMastery&, const SkillMastery&) = default;
};

// P(known | observation) before the learning transition.
double posterior_given_obs(double p_mastery, const BktParams& params, bool correct);

// p_cond + (1 - p_cond) * p_t
double apply_learning(double p_cond, double p_t);

SkillMastery bkt_update(const SkillMastery& mastery, const BktParams& params, bool correct);

// Strict: a posterior exactly at the threshold is not mastery.
bool is_mastered(double p_mastery, double threshold);

inline constexpr double kDefaultMasteryThreshold = 0.95;

// Per-skill parameters with a fallback for unknown skills.
class BktParamTable {
 public:
  BktParamTable() : fallback_(BktParams::defaults()) {}
  explicit BktParamTable(BktParams fallback) : fallback_(fallback) {}

  void set(const std::string& skill_id, const BktParams& params);
  const BktParams& get(const std::string& skill_id) const;
  bool contains(const std::string& skill_id) const { return table_.count(skill_id) != 0; }
  const BktParams& fallback() const { return fallback_; }
  std::size_t size() const { return table_.size(); }
  const std::map<std::string, BktParams>& entries() const { return table_; }

  // JSON array of {skill_id, p_l0, p_t, p_s, p_g}.
  static BktParamTable from_json(const nlohmann::json& doc);
  static BktParamTable load(const std::filesystem::path& path);

 private:
  BktParams fallback_;
  std::map<std::string, BktParams> table_;
};

void to_json(nlohmann::json& j, const BktParams& p);
BktParams bkt_params_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const SkillMastery& m);
void from_json(const nlohmann::json& j, SkillMastery& m);

}  // namespace tutor
