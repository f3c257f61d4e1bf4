#pragma once

#include "xcond/rng.hpp"
#include "xcond/types.hpp"

#include <cstdint>
#include <vector>

namespace xcond {

enum class NullKind { ShuffledPairing, CircularShift };

std::string_view to_string(NullKind k);
NullKind parse_null_kind(std::string_view s);

struct NullSpec {
  NullKind kind = NullKind::ShuffledPairing;
  int n_realizations = 20;
  std::uint64_t seed = 0;
};

// Target permutation for shuffled pairing: trial i of `sentence_ids` receives the target
// of trial perm[i], and perm[i] never belongs to the same sentence as i. Throws DataError
// when fewer than two distinct sentences are present.
std::vector<std::size_t> sentence_derangement(const std::vector<int>& sentence_ids, std::uint64_t seed);

// Circular-shift offset in [ceil(T/4), floor(3T/4)].
Eigen::Index circular_offset(Eigen::Index samples, Rng& rng);

// Copy of `dataset` with targets permuted (within each condition) or circularly
// shifted per trial. Deterministic in (spec.seed, realization_index).
Dataset make_null_dataset(const Dataset& dataset, const NullSpec& spec, int realization_index);

// Same, applied to an arbitrary trial subset, all treated as one permutation pool.
std::vector<TrialPair> make_null_pairs(const TrialSet& pairs, const NullSpec& spec, int realization_index);

}  // namespace xcond
