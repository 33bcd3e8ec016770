#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tutor/sim/stats.h"

namespace {

using tutor::sim::wilcoxon_signed_rank;

struct Brute {
  double w_plus;
  double p;
};

// Enumerates every sign assignment of the observed absolute values.
Brute brute_force(const std::vector<double>& diffs) {
  std::vector<double> nz;
  for (double d : diffs) {
    if (d != 0.0) nz.push_back(d);
  }
  const std::size_t n = nz.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::fabs(nz[j]) < std::fabs(nz[i])) ++less;
      else if (std::fabs(nz[j]) == std::fabs(nz[i])) ++equal;
    }
    rank[i] = less + (equal + 1) / 2.0;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (nz[i] > 0) observed += rank[i];
  }
  std::uint64_t le = 0, ge = 0;
  const std::uint64_t total = 1ull << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) w += rank[i];
    }
    if (w <= observed + 1e-9) ++le;
    if (w >= observed - 1e-9) ++ge;
  }
  return {observed, std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total))};
}

TEST(Wilcoxon, WorkedValues) {
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank({1, 2, 3}).p_value, 0.25);
  const auto r5 = wilcoxon_signed_rank({1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(r5.p_value, 0.0625);
  EXPECT_DOUBLE_EQ(r5.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r5.w_plus, 15.0);
  EXPECT_TRUE(r5.exact);
}

TEST(Wilcoxon, Degenerate) {
  const auto r = wilcoxon_signed_rank({0, 0, 0});
  EXPECT_TRUE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.n, 0u);
}

TEST(Wilcoxon, MatchesPermutationOracle) {
  std::mt19937_64 gen(2024);
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + gen() % 12;
    std::vector<double> d(n);
    const bool tied = c % 2 == 0;
    for (auto& x : d) {
      // half the cases draw from a small integer grid so ties and zeros are common
      x = tied ? static_cast<double>(static_cast<int>(gen() % 9) - 4)
               : std::ldexp(static_cast<double>(gen() % 100000) - 50000.0, -10);
    }
    const auto got = wilcoxon_signed_rank(d);
    const auto want = brute_force(d);
    if (got.n == 0) {
      ASSERT_TRUE(got.degenerate);
      continue;
    }
    ASSERT_TRUE(got.exact);
    ASSERT_DOUBLE_EQ(got.w_plus, want.w_plus) << "case " << c;
    ASSERT_NEAR(got.p_value, want.p, 1e-15) << "case " << c;
  }
}

TEST(Wilcoxon, NormalApproximationAgainstReference) {
  // reference: scipy.stats.wilcoxon(d, correction=True, method="approx")
  std::vector<double> d;
  for (int i = 1; i <= 30; ++i) d.push_back(((i * 37) % 23 - 11) + 0.5 * (i % 3));
  const auto r = wilcoxon_signed_rank(d);
  EXPECT_FALSE(r.exact);
  EXPECT_EQ(r.n, 29u);
  EXPECT_DOUBLE_EQ(r.statistic, 206.0);
  EXPECT_NEAR(r.p_value, 0.8119394581477203, 1e-12);
}

TEST(Wilcoxon, ExactLimitBoundary) {
  std::vector<double> d20, d21;
  for (int i = 1; i <= 20; ++i) d20.push_back(i % 4 ? i : -i);
  d21 = d20;
  d21.push_back(21);
  EXPECT_TRUE(wilcoxon_signed_rank(d20).exact);
  EXPECT_FALSE(wilcoxon_signed_rank(d21).exact);
  EXPECT_NEAR(wilcoxon_signed_rank(d20).p_value, brute_force(d20).p, 1e-15);
}

TEST(Summary, SampleSd) {
  const auto s = tutor::sim::summarize({2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_DOUBLE_EQ(s.mean, 5.0);
  EXPECT_NEAR(s.sd, std::sqrt(32.0 / 7.0), 1e-15);
  EXPECT_DOUBLE_EQ(tutor::sim::summarize({3}).sd, 0.0);
}

}  // namespace
