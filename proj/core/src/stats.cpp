#include "tutor/sim/stats.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace tutor::sim {

namespace {

struct Ranked {
  std::vector<double> abs_values;
  std::vector<int> doubled_ranks;  // 2 * mid-rank, always an integer
  std::vector<bool> positive;
  double tie_term = 0.0;           // sum of t^3 - t over tie groups
};

Ranked rank_nonzero(const std::vector<double>& diffs) {
  std::vector<std::pair<double, bool>> v;
  for (double d : diffs) {
    if (d != 0.0) v.emplace_back(std::fabs(d), d > 0.0);
  }
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Ranked r;
  r.abs_values.resize(v.size());
  r.doubled_ranks.resize(v.size());
  r.positive.resize(v.size());
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1].first == v[i].first) ++j;
    // positions i..j hold ranks i+1..j+1, mid-rank doubled is (i+1)+(j+1)
    const int doubled = static_cast<int>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      r.abs_values[k] = v[k].first;
      r.doubled_ranks[k] = doubled;
      r.positive[k] = v[k].second;
    }
    const double t = static_cast<double>(j - i + 1);
    r.tie_term += t * t * t - t;
    i = j + 1;
  }
  return r;
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences) {
  WilcoxonResult out;
  const Ranked r = rank_nonzero(differences);
  const std::size_t n = r.doubled_ranks.size();
  out.n = n;
  if (n == 0) {
    out.degenerate = true;
    out.p_value = 1.0;
    return out;
  }

  int w_plus2 = 0;
  int total2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    total2 += r.doubled_ranks[k];
    if (r.positive[k]) w_plus2 += r.doubled_ranks[k];
  }
  out.w_plus = w_plus2 / 2.0;
  out.statistic = std::min(w_plus2, total2 - w_plus2) / 2.0;

  if (n <= kExactLimit) {
    // counts[s]: sign assignments whose doubled W+ equals s
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(total2) + 1, 0);
    counts[0] = 1;
    int reach = 0;
    for (int rk : r.doubled_ranks) {
      for (int s = reach; s >= 0; --s) {
        if (counts[static_cast<std::size_t>(s)]) counts[static_cast<std::size_t>(s + rk)] += counts[static_cast<std::size_t>(s)];
      }
      reach += rk;
    }
    std::uint64_t lower = 0;
    std::uint64_t upper = 0;
    for (int s = 0; s <= total2; ++s) {
      if (s <= w_plus2) lower += counts[static_cast<std::size_t>(s)];
      if (s >= w_plus2) upper += counts[static_cast<std::size_t>(s)];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    out.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) / all);
    out.exact = true;
    return out;
  }

  const double nd = static_cast<double>(n);
  const double mu = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - r.tie_term / 48.0;
  out.exact = false;
  if (var <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::fabs(out.w_plus - mu) - 0.5) / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

}  // namespace tutor::sim
