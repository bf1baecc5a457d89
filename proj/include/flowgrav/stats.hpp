#pragma once

#include <cmath>

namespace flowgrav {

// Upper tail of chi-square with 1 degree of freedom: P(X > x) = erfc(sqrt(x/2)).
inline double chi2_upper_tail_df1(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(0.5 * x));
}

// Two-sided p-value for a standard normal z statistic.
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// Star convention: *** p < 0.01, ** p < 0.05, * p < 0.1 (strict inequalities).
inline const char* significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

}  // namespace flowgrav
