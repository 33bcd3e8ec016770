#include "tutor/knowledge_tracing.h"

#include <fstream>

#include <nlohmann/json.hpp>

#include "tutor/errors.h"

namespace tutor {
namespace {

void check_probability(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ValidationError(name, std::string(name) + " must be a probability in [0,1], got " +
                                    std::to_string(value));
  }
}

}  // namespace

BktParams::BktParams(double p_l0, double p_t, double p_s, double p_g)
    : p_l0_(p_l0), p_t_(p_t), p_s_(p_s), p_g_(p_g) {
  check_probability(p_l0, "p_l0");
  check_probability(p_t, "p_t");
  check_probability(p_s, "p_s");
  check_probability(p_g, "p_g");
  if (!(p_s + p_g < 1.0)) {
    throw ValidationError("p_s", "p_s + p_g must be < 1 (got " + std::to_string(p_s + p_g) + ")");
  }
}

BktParams BktParams::defaults() { return BktParams(0.3, 0.1, 0.1, 0.2); }

SkillMastery SkillMastery::initial(std::string skill_id, const BktParams& params) {
  return SkillMastery{std::move(skill_id), params.p_l0(), 0};
}

double posterior_given_obs(double p_mastery, const BktParams& params, bool correct) {
  const double known = p_mastery;
  const double unknown = 1.0 - p_mastery;
  if (correct) {
    const double num = known * (1.0 - params.p_s());
    const double den = num + unknown * params.p_g();
    // Only reachable with pL = 0 and pG = 0: nothing explains the observation.
    if (den == 0.0) return 0.0;
    return num / den;
  }
  const double num = known * params.p_s();
  const double den = num + unknown * (1.0 - params.p_g());
  // Only reachable with pL = 1 and pS = 0.
  if (den == 0.0) return 1.0;
  return num / den;
}

double apply_learning(double p_cond, double p_t) { return p_cond + (1.0 - p_cond) * p_t; }

SkillMastery bkt_update(const SkillMastery& mastery, const BktParams& params, bool correct) {
  SkillMastery next = mastery;
  next.p_mastery =
      apply_learning(posterior_given_obs(mastery.p_mastery, params, correct), params.p_t());
  ++next.opportunity_count;
  return next;
}

bool is_mastered(double p_mastery, double threshold) { return p_mastery > threshold; }

void BktParamTable::set(const std::string& skill_id, const BktParams& params) {
  table_.insert_or_assign(skill_id, params);
}

const BktParams& BktParamTable::get(const std::string& skill_id) const {
  auto it = table_.find(skill_id);
  return it == table_.end() ? fallback_ : it->second;
}

BktParamTable BktParamTable::from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) {
    throw ValidationError("", "BKT parameter table must be a JSON array");
  }
  BktParamTable table;
  for (const auto& row : doc) {
    if (!row.contains("skill_id")) throw ValidationError("skill_id", "missing skill_id");
    table.set(row.at("skill_id").get<std::string>(), bkt_params_from_json(row));
  }
  return table;
}

BktParamTable BktParamTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open BKT parameter file " + path.string());
  return from_json(nlohmann::json::parse(in));
}

void to_json(nlohmann::json& j, const BktParams& p) {
  j = nlohmann::json{{"p_l0", p.p_l0()}, {"p_t", p.p_t()}, {"p_s", p.p_s()}, {"p_g", p.p_g()}};
}

BktParams bkt_params_from_json(const nlohmann::json& j) {
  for (const char* key : {"p_l0", "p_t", "p_s", "p_g"}) {
    if (!j.contains(key) || !j.at(key).is_number()) {
      throw ValidationError(key, std::string("missing or non-numeric ") + key);
    }
  }
  return BktParams(j.at("p_l0").get<double>(), j.at("p_t").get<double>(),
                   j.at("p_s").get<double>(), j.at("p_g").get<double>());
}

void to_json(nlohmann::json& j, const SkillMastery& m) {
  j = nlohmann::json{{"skill_id", m.skill_id},
                     {"p_mastery", m.p_mastery},
                     {"opportunity_count", m.opportunity_count}};
}

void from_json(const nlohmann::json& j, SkillMastery& m) {
  j.at("skill_id").get_to(m.skill_id);
  j.at("p_mastery").get_to(m.p_mastery);
  j.at("opportunity_count").get_to(m.opportunity_count);
}

}  // namespace tutor
