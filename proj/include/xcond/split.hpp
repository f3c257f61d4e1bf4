#pragma once

#include "xcond/types.hpp"

#include <cstdint>
#include <set>

namespace xcond {

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Sentence-level folds; both repetitions of a sentence always land in the same fold.
struct SplitPlan {
  std::set<int> train_ids;
  std::set<int> val_ids;
  std::set<int> test_ids;
  std::uint64_t seed = 0;
};

// Throws ConfigError unless all fractions are finite, >= 0 and sum to 1.
void validate_fractions(const SplitFractions& fractions);

// Fold sizes are round(train*N), round(val*N) and the remainder for test.
// Throws ConfigError for bad fractions or when a nonempty fold would get no sentence.
SplitPlan make_split(const std::vector<int>& sentence_ids, SplitFractions fractions, std::uint64_t seed);
SplitPlan make_split(const Dataset& dataset, SplitFractions fractions, std::uint64_t seed);

}  // namespace xcond
