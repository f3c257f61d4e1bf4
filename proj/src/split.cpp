#include "xcond/split.hpp"

#include "xcond/error.hpp"
#include "xcond/rng.hpp"

#include <algorithm>
#include <cmath>

namespace xcond {

void validate_fractions(const SplitFractions& fr) {
  for (double f : {fr.train, fr.val, fr.test}) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("split fractions must be finite and >= 0");
  }
  if (std::abs(fr.train + fr.val + fr.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

SplitPlan make_split(const std::vector<int>& sentence_ids, SplitFractions fr, std::uint64_t seed) {
  validate_fractions(fr);
  std::vector<int> ids(sentence_ids);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const auto n = static_cast<long>(ids.size());
  const long n_train = std::lround(fr.train * static_cast<double>(n));
  const long n_val = std::lround(fr.val * static_cast<double>(n));
  const long n_test = n - n_train - n_val;
  auto check = [&](double f, long count, const char* name) {
    if (f > 0.0 && count < 1) {
      throw ConfigError("too few sentences (" + std::to_string(n) + ") to populate the " + name + " fold");
    }
  };
  if (n_test < 0) throw ConfigError("split rounding leaves no room for the test fold");
  check(fr.train, n_train, "train");
  check(fr.val, n_val, "validation");
  check(fr.test, n_test, "test");

  Rng rng(seed);
  shuffle(ids, rng);
  SplitPlan plan;
  plan.seed = seed;
  plan.train_ids.insert(ids.begin(), ids.begin() + n_train);
  plan.val_ids.insert(ids.begin() + n_train, ids.begin() + n_train + n_val);
  plan.test_ids.insert(ids.begin() + n_train + n_val, ids.end());
  return plan;
}

SplitPlan make_split(const Dataset& dataset, SplitFractions fractions, std::uint64_t seed) {
  return make_split(dataset.sentence_ids(), fractions, seed);
}

}  // namespace xcond
