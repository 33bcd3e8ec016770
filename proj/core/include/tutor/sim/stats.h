#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tutor::sim {

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double p_value = 1.0;    // two-sided
  std::size_t n = 0;       // non-zero differences
  bool exact = true;
  bool degenerate = false; // every difference was zero
};

// Signed-rank test on paired differences. Zeros are dropped, ties get mid
// ranks. Exact null distribution up to kExactLimit non-zero differences,
// tie- and continuity-corrected normal approximation above it.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences);

inline constexpr std::size_t kExactLimit = 20;

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample (n - 1); 0 for n < 2
  std::size_t n = 0;
};

Summary summarize(const std::vector<double>& xs);

}  // namespace tutor::sim
