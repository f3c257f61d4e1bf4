#include "helpers.hpp"
#include "xcond/error.hpp"
#include "xcond/nulls.hpp"
#include "xcond/rng.hpp"
#include "xcond/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

using namespace xcond;

namespace {

// p by brute-force bitmask enumeration over all subsets of size na.
double bitmask_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const int n = static_cast<int>(all.size()), na = static_cast<int>(a.size());
  auto stat = [&](unsigned mask) {
    double sa = 0, sb = 0;
    for (int i = 0; i < n; ++i) ((mask >> i) & 1u ? sa : sb) += all[static_cast<std::size_t>(i)];
    return sa / na - sb / (n - na);
  };
  const double obs = stat((1u << na) - 1u);
  long hits = 0, total = 0;
  for (unsigned m = 0; m < (1u << n); ++m) {
    if (std::popcount(m) != na) continue;
    ++total;
    if (stat(m) >= obs - 1e-12) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<double> normal_sample(std::size_t n, double shift, std::mt19937_64& rng) {
  std::normal_distribution<double> g(shift, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("exact permutation test matches brute-force enumeration") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = normal_sample(3 + rep % 2, 0.5, rng), b = normal_sample(4, 0.0, rng);
    const auto r = permutation_pvalue(a, b, Alternative::Greater, 10000, 1);
    CHECK(r.exact);
    CHECK(r.p_value == doctest::Approx(bitmask_pvalue(a, b)).epsilon(1e-14));
  }
  const std::vector<double> same{1.0, 1.0, 1.0, 1.0};
  CHECK(permutation_pvalue(same, same).p_value == 1.0);
}

TEST_CASE("resampled permutation test") {
  std::mt19937_64 rng(42);
  SUBCASE("identical distributions give p near one half") {
    double sum = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
      const auto a = normal_sample(30, 0.0, rng), b = normal_sample(30, 0.0, rng);
      const auto r = permutation_pvalue(a, b, Alternative::Greater, 2000, static_cast<std::uint64_t>(rep));
      CHECK_FALSE(r.exact);
      sum += r.p_value;
    }
    CHECK(sum / 40 == doctest::Approx(0.5).epsilon(0.15));
  }
  SUBCASE("a large shift attains the add-one floor") {
    const auto a = normal_sample(30, 10.0, rng), b = normal_sample(30, 0.0, rng);
    const auto r = permutation_pvalue(a, b, Alternative::Greater, 999, 3);
    CHECK(r.p_value == doctest::Approx(1.0 / 1000.0));
    CHECK(r.n_permutations == 999);
    CHECK(r.effect_size_d.has_value());
  }
  SUBCASE("seeded and reproducible") {
    const auto a = normal_sample(20, 0.2, rng), b = normal_sample(20, 0.0, rng);
    CHECK(permutation_pvalue(a, b, Alternative::Greater, 500, 7).p_value ==
          permutation_pvalue(a, b, Alternative::Greater, 500, 7).p_value);
  }
  SUBCASE("two-sided") {
    const auto a = normal_sample(30, -10.0, rng), b = normal_sample(30, 0.0, rng);
    CHECK(permutation_pvalue(a, b, Alternative::Greater, 999, 3).p_value > 0.99);
    CHECK(permutation_pvalue(a, b, Alternative::TwoSided, 999, 3).p_value == doctest::Approx(1.0 / 1000.0));
  }
  CHECK_THROWS_AS(permutation_pvalue(std::vector<double>{}, std::vector<double>{1.0}), DataError);
  CHECK_THROWS_AS(permutation_pvalue(std::vector<double>{1.0}, std::vector<double>{1.0}, Alternative::Greater, 0),
                  ConfigError);
}

TEST_CASE("cohens d") {
  // means 2 and 3, both sample variances 1
  const std::vector<double> a{1, 2, 3}, b{2, 3, 4};
  CHECK(cohens_d(a, b) == doctest::Approx(-1.0));
  CHECK(cohens_d(b, a) == doctest::Approx(1.0));
  const std::vector<double> c{1, 2, 3, 4}, d{1, 2, 3, 4};
  CHECK(cohens_d(c, d) == 0.0);
  // variances 1 and 4 with equal n: pooled SD sqrt(2.5)
  const std::vector<double> e{0, 1, 2}, f{0, 2, 4};
  CHECK(cohens_d(e, f) == doctest::Approx(-1.0 / std::sqrt(2.5)));
  CHECK_THROWS_AS(cohens_d(std::vector<double>{1.0}, b), NumericError);
  CHECK_THROWS_AS(cohens_d(std::vector<double>{1, 1}, std::vector<double>{2, 2}), NumericError);
}

TEST_CASE("steiger test, shared variable") {
  SUBCASE("reference values") {
    // Reference computed independently at 40-digit precision.
    const auto r = steiger_test(0.4, 0.5, 0.1, 103);
    CHECK(r.statistic == doctest::Approx(-0.88871846995587277732).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(0.37415440217200173474).epsilon(1e-12));
  }
  SUBCASE("equal correlations") {
    const auto r = steiger_test(0.3, 0.3, 0.6, 50);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
  }
  SUBCASE("antisymmetric in the compared pair") {
    const auto a = steiger_test(0.2, 0.6, 0.4, 40), b = steiger_test(0.6, 0.2, 0.4, 40);
    CHECK(a.statistic == doctest::Approx(-b.statistic));
    CHECK(a.p_value == doctest::Approx(b.p_value));
  }
  SUBCASE("p falls with n") {
    double prev = 1.0;
    for (long n : {10L, 30L, 100L, 300L}) {
      const double p = steiger_test(0.3, 0.5, 0.2, n).p_value;
      CHECK(p < prev);
      prev = p;
    }
  }
  SUBCASE("higher overlap makes the same difference more significant") {
    CHECK(steiger_test(0.3, 0.5, 0.8, 50).p_value < steiger_test(0.3, 0.5, 0.0, 50).p_value);
  }
  CHECK_THROWS_AS(steiger_test(1.0, 0.5, 0.1, 50), NumericError);
  CHECK_THROWS_AS(steiger_test(0.4, 0.5, 0.1, 3), DataError);
}

TEST_CASE("steiger test, non-overlapping") {
  const auto r = steiger_test_nonoverlapping(0.5, 0.6, 0.2, 0.3, 0.25, 0.4, 100);
  CHECK(r.statistic == doctest::Approx(-1.0305404923618932864).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.30275635420711831048).epsilon(1e-12));
  const auto eq = steiger_test_nonoverlapping(0.4, 0.4, 0.1, 0.1, 0.1, 0.1, 30);
  CHECK(eq.p_value == 1.0);
  // With zero cross correlations the test reduces to independent Fisher z.
  const auto ind = steiger_test_nonoverlapping(0.2, 0.5, 0.0, 0.0, 0.0, 0.0, 60);
  const double z = (std::atanh(0.2) - std::atanh(0.5)) * std::sqrt(57.0) / std::sqrt(2.0);
  CHECK(ind.statistic == doctest::Approx(z).epsilon(1e-12));
}

TEST_CASE("linear fit") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(3 * v - 1);
  const auto f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(3.0));
  CHECK(f.intercept == doctest::Approx(-1.0));
  REQUIRE(f.r.has_value());
  CHECK(*f.r == doctest::Approx(1.0));

  const auto flat = linear_fit(x, std::vector<double>(5, 2.0));
  CHECK(flat.slope == 0.0);
  CHECK(flat.intercept == doctest::Approx(2.0));
  CHECK_FALSE(flat.r.has_value());
  CHECK_THROWS_AS(linear_fit(std::vector<double>(5, 1.0), y), NumericError);

  // Against the 2x2 normal equations.
  std::mt19937_64 rng(43);
  const auto xr = normal_sample(7, 0.0, rng), yr = normal_sample(7, 0.0, rng);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < 7; ++i) {
    sx += xr[i];
    sy += yr[i];
    sxx += xr[i] * xr[i];
    sxy += xr[i] * yr[i];
  }
  const double det = 7 * sxx - sx * sx;
  const auto fr = linear_fit(xr, yr);
  CHECK(fr.slope == doctest::Approx((7 * sxy - sx * sy) / det).epsilon(1e-12));
  CHECK(fr.intercept == doctest::Approx((sxx * sy - sx * sxy) / det).epsilon(1e-12));
  CHECK(*fr.r == doctest::Approx(oracle::pearson(xr, yr)).epsilon(1e-12));
}

TEST_CASE("sentence derangement") {
  const std::vector<int> two{0, 1};
  const auto p = sentence_derangement(two, 5);
  CHECK(p == std::vector<std::size_t>{1, 0});

  const std::vector<int> ids{0, 0, 1, 1, 2, 2, 3, 3, 4, 4};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto perm = sentence_derangement(ids, seed);
    std::vector<std::size_t> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
    for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[perm[i]] != ids[i]);
  }
  CHECK(sentence_derangement(ids, 3) == sentence_derangement(ids, 3));
  CHECK_THROWS_AS(sentence_derangement(std::vector<int>{7, 7, 7}, 1), DataError);
}

TEST_CASE("circular offsets stay in the middle half") {
  Rng rng(44);
  std::set<Eigen::Index> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto o = circular_offset(100, rng);
    CHECK(o >= 25);
    CHECK(o <= 75);
    seen.insert(o);
  }
  CHECK(seen.size() == 51);
  Rng r2(1);
  const auto o = circular_offset(7, r2);
  CHECK(o >= 2);
  CHECK(o <= 5);
}

TEST_CASE("null datasets") {
  const Dataset ds(testutil::random_pairs(4, 3, 2, 40, 45));
  SUBCASE("shuffled pairing keeps shape and labels and breaks pairing") {
    const NullSpec spec{NullKind::ShuffledPairing, 3, 9};
    const Dataset nd = make_null_dataset(ds, spec, 0);
    REQUIRE(nd.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& a = ds.pairs()[i];
      const auto& b = nd.pairs()[i];
      CHECK(a.trial.sentence_id == b.trial.sentence_id);
      CHECK(a.trial.condition == b.trial.condition);
      CHECK(a.trial.repetition == b.trial.repetition);
      CHECK(a.trial.data == b.trial.data);
      CHECK(b.target.data.rows() == a.target.data.rows());
      CHECK(b.target.data.cols() == a.target.data.cols());
      CHECK(b.target.data != a.target.data);
    }
    const Dataset again = make_null_dataset(ds, spec, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(again.pairs()[i].target.data == nd.pairs()[i].target.data);
    const Dataset other = make_null_dataset(ds, spec, 1);
    bool differs = false;
    for (std::size_t i = 0; i < ds.size(); ++i) differs |= other.pairs()[i].target.data != nd.pairs()[i].target.data;
    CHECK(differs);
  }
  SUBCASE("circular shift is a rotation of the original target") {
    const NullSpec spec{NullKind::CircularShift, 1, 2};
    const Dataset nd = make_null_dataset(ds, spec, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const Eigen::MatrixXd& a = ds.pairs()[i].target.data;
      const Eigen::MatrixXd& b = nd.pairs()[i].target.data;
      bool found = false;
      for (Eigen::Index off = 10; off <= 30 && !found; ++off) {
        bool match = true;
        for (Eigen::Index t = 0; t < a.cols() && match; ++t) match = b.col((t + off) % a.cols()) == a.col(t);
        found = match;
      }
      CHECK(found);
    }
  }
  SUBCASE("a single sentence cannot be shuffled") {
    const Dataset one(testutil::random_pairs(1, 3, 2, 40, 46));
    CHECK_THROWS_AS(make_null_dataset(one, NullSpec{NullKind::ShuffledPairing, 1, 0}, 0), DataError);
  }
}

TEST_CASE("permutation p is uniform under the null") {
  std::mt19937_64 rng(47);
  const int reps = 200;
  std::vector<double> ps;
  for (int r = 0; r < reps; ++r) {
    const auto a = normal_sample(20, 0.0, rng), b = normal_sample(40, 0.0, rng);
    ps.push_back(permutation_pvalue(a, b, Alternative::Greater, 999, derive_seed(47, static_cast<std::uint64_t>(r)))
                     .p_value);
  }
  std::sort(ps.begin(), ps.end());
  double sup = 0.0;
  for (int i = 0; i < reps; ++i) {
    const double p = ps[static_cast<std::size_t>(i)];
    sup = std::max({sup, std::abs(static_cast<double>(i + 1) / reps - p), std::abs(static_cast<double>(i) / reps - p)});
  }
  CHECK(sup < 0.1);
}
