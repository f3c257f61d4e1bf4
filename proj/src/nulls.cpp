#include "xcond/nulls.hpp"

#include "xcond/error.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

namespace xcond {

std::string_view to_string(NullKind k) {
  return k == NullKind::ShuffledPairing ? "shuffled" : "circular";
}

NullKind parse_null_kind(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "shuffled" || lower == "shuffledpairing" || lower == "shuffle") return NullKind::ShuffledPairing;
  if (lower == "circular" || lower == "circularshift" || lower == "shift") return NullKind::CircularShift;
  throw ConfigError("unknown null kind '" + std::string(s) + "' (expected shuffled or circular)");
}

std::vector<std::size_t> sentence_derangement(const std::vector<int>& sentence_ids, std::uint64_t seed) {
  const std::set<int> distinct(sentence_ids.begin(), sentence_ids.end());
  if (distinct.size() < 2) {
    throw DataError("shuffled pairing needs trials from at least two sentences per condition");
  }
  const std::size_t n = sentence_ids.size();
  Rng rng(seed);
  std::vector<std::size_t> perm(n);
  // Rejection sampling; the acceptance rate stays near exp(-reps) for large N.
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(perm, rng);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) ok = sentence_ids[perm[i]] != sentence_ids[i];
    if (ok) return perm;
  }
  throw DataError("could not draw a sentence-level derangement (one sentence dominates the trial set)");
}

Eigen::Index circular_offset(Eigen::Index samples, Rng& rng) {
  const Eigen::Index lo = (samples + 3) / 4;
  const Eigen::Index hi = (3 * samples) / 4;
  if (hi < lo) return lo;
  return lo + static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

namespace {

Eigen::MatrixXd circshift(const Eigen::MatrixXd& m, Eigen::Index offset) {
  const Eigen::Index t = m.cols();
  Eigen::MatrixXd out(m.rows(), t);
  out.rightCols(t - offset) = m.leftCols(t - offset);
  if (offset > 0) out.leftCols(offset) = m.rightCols(offset);
  return out;
}

}  // namespace

std::vector<TrialPair> make_null_pairs(const TrialSet& pairs, const NullSpec& spec, int realization_index) {
  if (spec.n_realizations < 1) throw ConfigError("null spec needs n_realizations >= 1");
  const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(realization_index));
  std::vector<TrialPair> out;
  out.reserve(pairs.size());
  for (const TrialPair& p : pairs) out.push_back(p);
  if (spec.kind == NullKind::ShuffledPairing) {
    std::vector<int> ids;
    for (const TrialPair& p : pairs) ids.push_back(p.trial.sentence_id);
    const auto perm = sentence_derangement(ids, seed);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const TrialPair& donor = pairs[perm[i]];
      if (donor.target.samples() != out[i].trial.samples()) {
        // Mismatched lengths: wrap or truncate the donor target to the receiving trial.
        Eigen::MatrixXd t(donor.target.freqs(), out[i].trial.samples());
        for (Eigen::Index c = 0; c < t.cols(); ++c) t.col(c) = donor.target.data.col(c % donor.target.samples());
        out[i].target.data = std::move(t);
      } else {
        out[i].target.data = donor.target.data;
      }
      out[i].target_path = donor.target_path;
    }
  } else {
    Rng rng(seed);
    for (auto& p : out) p.target.data = circshift(p.target.data, circular_offset(p.target.samples(), rng));
  }
  return out;
}

Dataset make_null_dataset(const Dataset& dataset, const NullSpec& spec, int realization_index) {
  std::vector<TrialPair> all;
  for (Condition c : dataset.conditions()) {
    NullSpec per = spec;
    per.seed = derive_seed(spec.seed, 1000 + index_of(c));
    auto part = make_null_pairs(dataset.select(c), per, realization_index);
    std::move(part.begin(), part.end(), std::back_inserter(all));
  }
  // Restore the original dataset order.
  std::vector<TrialPair> ordered;
  ordered.reserve(all.size());
  for (const auto& p : dataset.pairs()) {
    for (auto& q : all) {
      if (q.trial.sentence_id == p.trial.sentence_id && q.trial.repetition == p.trial.repetition &&
          q.trial.condition == p.trial.condition) {
        ordered.push_back(std::move(q));
        break;
      }
    }
  }
  return Dataset(std::move(ordered));
}

}  // namespace xcond
