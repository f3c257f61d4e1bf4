#include "xcond/stats.hpp"

#include "xcond/error.hpp"
#include "xcond/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace xcond {

double mean(std::span<const double> v) {
  if (v.empty()) throw DataError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

namespace {

double sum_sq_dev(std::span<const double> v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

// C(n, k) as a double, saturating at +inf.
double binomial(long n, long k) {
  k = std::min(k, n - k);
  double c = 1.0;
  for (long i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

bool extreme(double stat, double observed, Alternative alt) {
  // Relative slack so relabellings equal to the observed split count as "at least as extreme".
  const double tol = 1e-12 * std::max(1.0, std::abs(observed));
  if (alt == Alternative::Greater) return stat >= observed - tol;
  return std::abs(stat) >= std::abs(observed) - tol;
}

}  // namespace

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw NumericError("cohens_d needs at least two values per sample");
  const double ma = mean(a), mb = mean(b);
  const double pooled = (sum_sq_dev(a, ma) + sum_sq_dev(b, mb)) / static_cast<double>(a.size() + b.size() - 2);
  if (!(pooled > 0.0)) throw NumericError("cohens_d: zero pooled variance");
  return (ma - mb) / std::sqrt(pooled);
}

StatResult permutation_pvalue(std::span<const double> observed, std::span<const double> null, Alternative alternative,
                              long n_resamples, std::uint64_t seed) {
  if (observed.empty() || null.empty()) throw DataError("permutation test needs two nonempty samples");
  if (n_resamples < 1) throw ConfigError("permutation test needs at least one resample");
  const long na = static_cast<long>(observed.size()), nb = static_cast<long>(null.size());
  const long n = na + nb;
  std::vector<double> pooled(observed.begin(), observed.end());
  pooled.insert(pooled.end(), null.begin(), null.end());
  const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);
  // Difference of means given the sum of the first group.
  auto diff = [&](double sum_a) { return sum_a / na - (total - sum_a) / nb; };

  StatResult out;
  out.statistic = mean(observed) - mean(null);
  try {
    out.effect_size_d = cohens_d(observed, null);
  } catch (const NumericError&) {
  }
  const double obs_sum = std::accumulate(observed.begin(), observed.end(), 0.0);
  const double obs_stat = diff(obs_sum);

  if (binomial(n, na) <= static_cast<double>(n_resamples)) {
    // Enumerate every subset of size na as the "observed" group.
    std::vector<char> mask(static_cast<std::size_t>(n), 0);
    std::fill(mask.begin(), mask.begin() + na, 1);
    long count = 0, hits = 0;
    do {
      double s = 0.0;
      for (long i = 0; i < n; ++i) {
        if (mask[static_cast<std::size_t>(i)]) s += pooled[static_cast<std::size_t>(i)];
      }
      hits += extreme(diff(s), obs_stat, alternative) ? 1 : 0;
      ++count;
    } while (std::prev_permutation(mask.begin(), mask.end()));
    out.p_value = static_cast<double>(hits) / static_cast<double>(count);
    out.n_permutations = count;
    out.exact = true;
    return out;
  }

  Rng rng(seed);
  std::vector<std::size_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  long hits = 0;
  for (long r = 0; r < n_resamples; ++r) {
    // Partial Fisher-Yates: the first na slots form a uniform random subset.
    double s = 0.0;
    for (long i = 0; i < na; ++i) {
      const auto j = static_cast<std::size_t>(i) + uniform_index(rng, static_cast<std::uint64_t>(n - i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
      s += pooled[idx[static_cast<std::size_t>(i)]];
    }
    hits += extreme(diff(s), obs_stat, alternative) ? 1 : 0;
  }
  out.p_value = static_cast<double>(1 + hits) / static_cast<double>(1 + n_resamples);
  out.n_permutations = n_resamples;
  return out;
}

namespace {

void check_r(double r, const char* name) {
  if (!(std::abs(r) < 1.0)) throw NumericError(std::string("steiger_test: ") + name + " must lie in (-1, 1)");
}

StatResult normal_two_sided(double z) {
  StatResult out;
  out.statistic = z;
  out.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
  return out;
}

}  // namespace

StatResult steiger_test(double r_xy1, double r_xy2, double r_y1y2, long n) {
  if (n < 4) throw DataError("steiger_test needs n >= 4");
  check_r(r_xy1, "r_xy1");
  check_r(r_xy2, "r_xy2");
  // |r_y1y2| = 1 forces r_xy1 = r_xy2; accept rounding-level differences in that limit.
  if (r_xy1 == r_xy2 || (std::abs(r_y1y2) == 1.0 && std::abs(r_xy1 - r_xy2) <= 1e-12)) {
    if (!(std::abs(r_y1y2) <= 1.0)) throw NumericError("steiger_test: r_y1y2 must lie in [-1, 1]");
    return normal_two_sided(0.0);
  }
  check_r(r_y1y2, "r_y1y2");
  const double rbar = 0.5 * (r_xy1 + r_xy2);
  const double rb2 = rbar * rbar;
  const double psi = r_y1y2 * (1.0 - 2.0 * rb2) - 0.5 * rb2 * (1.0 - 2.0 * rb2 - r_y1y2 * r_y1y2);
  const double s = psi / ((1.0 - rb2) * (1.0 - rb2));
  const double z = (std::atanh(r_xy1) - std::atanh(r_xy2)) * std::sqrt(static_cast<double>(n - 3)) /
                   std::sqrt(2.0 - 2.0 * s);
  return normal_two_sided(z);
}

StatResult steiger_test_nonoverlapping(double r_jk, double r_hm, double r_jh, double r_jm, double r_kh, double r_km,
                                       long n) {
  if (n < 4) throw DataError("steiger_test needs n >= 4");
  check_r(r_jk, "r_jk");
  check_r(r_hm, "r_hm");
  if (r_jk == r_hm) return normal_two_sided(0.0);
  for (double r : {r_jh, r_jm, r_kh, r_km}) check_r(r, "cross correlation");
  const double rb = 0.5 * (r_jk + r_hm);
  // Pearson-Filon covariance with r_jk and r_hm replaced by their pooled mean.
  const double psi = 0.5 * ((r_jh - rb * r_kh) * (r_km - r_kh * rb) + (r_jm - r_jh * rb) * (r_kh - rb * r_jh) +
                            (r_jh - r_jm * rb) * (r_km - rb * r_jm) + (r_jm - rb * r_km) * (r_kh - r_km * rb));
  const double s = psi / ((1.0 - rb * rb) * (1.0 - rb * rb));
  const double z =
      (std::atanh(r_jk) - std::atanh(r_hm)) * std::sqrt(static_cast<double>(n - 3)) / std::sqrt(2.0 - 2.0 * s);
  return normal_two_sided(z);
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("linear_fit needs equal-length samples of size >= 2");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw NumericError("linear_fit: x has zero variance");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy > 0.0) f.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return f;
}

}  // namespace xcond
