#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace xcond {

struct StatResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<double> effect_size_d;
  long n_permutations = 0;
  bool exact = false;  // p from full enumeration rather than resampling
};

enum class Alternative { Greater, TwoSided };

// Permutation test of mean(observed) - mean(null). When the number of distinct
// relabellings C(n_obs + n_null, n_obs) is at most n_resamples they are enumerated
// exactly (p = fraction of relabellings at least as extreme, identity included);
// otherwise p = (1 + #{resampled >= observed}) / (1 + n_resamples). Cohen's d is
// attached when defined.
StatResult permutation_pvalue(std::span<const double> observed, std::span<const double> null,
                              Alternative alternative = Alternative::Greater, long n_resamples = 10000,
                              std::uint64_t seed = 0);

// (mean(a) - mean(b)) / pooled SD with (n-1) weights. Throws NumericError for n < 2 or
// zero pooled variance.
double cohens_d(std::span<const double> a, std::span<const double> b);

// Steiger's Z for two dependent correlations sharing variable x: r(x,y1) vs r(x,y2),
// with r(y1,y2) their overlap. Fisher z difference scaled by the pooled-r asymptotic
// covariance; p is two-sided normal.
StatResult steiger_test(double r_xy1, double r_xy2, double r_y1y2, long n);

// Steiger's Z for two dependent, non-overlapping correlations r(j,k) vs r(h,m) over
// the same n cases.
StatResult steiger_test_nonoverlapping(double r_jk, double r_hm, double r_jh, double r_jm, double r_kh, double r_km,
                                       long n);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::optional<double> r;  // undefined when y is constant
};

// Ordinary least squares y = slope * x + intercept. Throws NumericError for zero x variance.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);

}  // namespace xcond
