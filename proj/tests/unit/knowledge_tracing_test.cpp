#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <nlohmann/json.hpp>

#include <random>

#include "tutor/errors.h"
#include "tutor/knowledge_tracing.h"

namespace {

using tutor::BktParams;
using tutor::SkillMastery;
using big = boost::multiprecision::cpp_dec_float_50;

// Joint-probability form of Bayes, evaluated in 50 digits.
double oracle(double pl, const BktParams& p, bool correct) {
  big L(pl), S(p.p_s()), G(p.p_g()), T(p.p_t());
  big known = correct ? big(L * (1 - S)) : big(L * S);
  big unknown = correct ? big((1 - L) * G) : big((1 - L) * (1 - G));
  big cond = known / (known + unknown);
  big next = cond + (1 - cond) * T;
  return next.convert_to<double>();
}

TEST(Bkt, WorkedExamples) {
  const BktParams p(0.3, 0.1, 0.1, 0.2);
  EXPECT_NEAR(tutor::bkt_update({"s", 0.5, 0}, p, true).p_mastery, 0.836364, 1e-6);
  EXPECT_NEAR(tutor::bkt_update({"s", 0.5, 0}, p, false).p_mastery, 0.2, 1e-12);
  EXPECT_NEAR(tutor::apply_learning(1.0 / 9.0, 0.1), 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(tutor::apply_learning(1.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(tutor::apply_learning(0.0, 0.0), 0.0);
  const BktParams no_learning(0.3, 0.0, 0.1, 0.2);
  EXPECT_NEAR(tutor::bkt_update({"s", 0.0, 0}, no_learning, false).p_mastery, 0.0, 1e-15);
}

TEST(Bkt, MatchesHighPrecisionOracle) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 10000) {
    const double s = u(gen) * 0.5, g = u(gen) * 0.5;
    if (s + g >= 1.0) continue;
    const BktParams p(u(gen), u(gen), s, g);
    const double pl = u(gen);
    const bool correct = gen() & 1;
    const auto next = tutor::bkt_update({"k", pl, 3}, p, correct);
    ASSERT_NEAR(next.p_mastery, oracle(pl, p, correct), 1e-12) << pl << " " << correct;
    ASSERT_EQ(next.opportunity_count, 4u);
    ++checked;
  }
}

TEST(Bkt, EvidenceDirectionAndRange) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (int i = 0; i < 5000; ++i) {
    const double s = u(gen) * 0.49, g = u(gen) * 0.49;
    const BktParams p(0.3, 0.1, s, g);
    const double pl = u(gen);
    const double up = tutor::posterior_given_obs(pl, p, true);
    const double down = tutor::posterior_given_obs(pl, p, false);
    ASSERT_GE(up, pl - 1e-15);
    ASSERT_LE(down, pl + 1e-15);
    ASSERT_GE(down, 0.0);
    ASSERT_LE(up, 1.0);
  }
}

TEST(Bkt, FixedPoints) {
  const BktParams p(0.3, 0.1, 0.1, 0.2);
  EXPECT_DOUBLE_EQ(tutor::posterior_given_obs(1.0, p, true), 1.0);
  const BktParams still(0.3, 0.0, 0.1, 0.2);
  EXPECT_DOUBLE_EQ(tutor::bkt_update({"s", 0.0, 0}, still, false).p_mastery, 0.0);
}

TEST(Bkt, ConstructionGuards) {
  EXPECT_THROW(BktParams(1.2, 0.1, 0.1, 0.2), tutor::ValidationError);
  EXPECT_THROW(BktParams(0.3, -0.1, 0.1, 0.2), tutor::ValidationError);
  EXPECT_THROW(BktParams(0.3, 0.1, 0.5, 0.5), tutor::ValidationError);
  EXPECT_NO_THROW(BktParams(0.3, 0.1, 0.49, 0.5));
}

TEST(Bkt, StrictMastery) {
  EXPECT_TRUE(tutor::is_mastered(0.96, 0.95));
  EXPECT_FALSE(tutor::is_mastered(0.95, 0.95));
  EXPECT_FALSE(tutor::is_mastered(0.40, 0.95));
}

TEST(Bkt, DefaultsAndTable) {
  EXPECT_EQ(BktParams::defaults(), BktParams(0.3, 0.1, 0.1, 0.2));
  const auto table = tutor::BktParamTable::from_json(nlohmann::json::parse(
      R"([{"skill_id":"frac","p_l0":0.2,"p_t":0.15,"p_s":0.05,"p_g":0.25}])"));
  EXPECT_EQ(table.get("frac"), BktParams(0.2, 0.15, 0.05, 0.25));
  EXPECT_EQ(table.get("other"), BktParams::defaults());
  EXPECT_THROW(tutor::BktParamTable::from_json(nlohmann::json::parse(
                   R"([{"skill_id":"x","p_l0":0.2,"p_t":0.1,"p_s":0.6,"p_g":0.6}])")),
               tutor::ValidationError);
}

}  // namespace
