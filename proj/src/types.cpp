#include "xcond/types.hpp"

#include "xcond/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace xcond {

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::Vocalized:
      return "vocalized";
    case Condition::Mimed:
      return "mimed";
    case Condition::Imagined:
      return "imagined";
  }
  return "unknown";
}

Condition parse_condition(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "vocalized" || lower == "v") return Condition::Vocalized;
  if (lower == "mimed" || lower == "m") return Condition::Mimed;
  if (lower == "imagined" || lower == "i") return Condition::Imagined;
  throw DataError("unknown condition label '" + std::string(s) + "'");
}

void require_finite(const Eigen::MatrixXd& m, const std::string& what) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        std::ostringstream os;
        os << what << ": non-finite value at (" << i << ", " << j << ")";
        throw DataError(os.str());
      }
    }
  }
}

namespace {

std::string describe(const TrialPair& p) {
  std::ostringstream os;
  os << "sentence " << p.trial.sentence_id << " rep " << p.trial.repetition << " "
     << to_string(p.trial.condition);
  if (!p.trial_path.empty()) os << " [" << p.trial_path << "]";
  return os.str();
}

std::string target_name(const TrialPair& p) {
  return p.target_path.empty() ? describe(p) + " spectrogram" : p.target_path;
}

std::string trial_name(const TrialPair& p) {
  return p.trial_path.empty() ? describe(p) + " trial" : p.trial_path;
}

}  // namespace

Dataset::Dataset(std::vector<TrialPair> pairs) : pairs_(std::move(pairs)) {
  std::set<std::tuple<int, int, Condition>> keys;
  std::map<std::pair<int, Condition>, std::set<int>> reps;
  std::set<int> ids;
  for (const auto& p : pairs_) {
    const auto& x = p.trial;
    const auto& s = p.target;
    if (x.channels() < 1 || x.samples() < 1) {
      throw DataError(trial_name(p) + ": trial must have at least one channel and one sample");
    }
    if (s.freqs() < 1) throw DataError(target_name(p) + ": spectrogram has no frequency rows");
    if (!(x.sample_rate_hz > 0.0)) throw DataError(trial_name(p) + ": sample_rate_hz must be positive");
    if (x.sentence_id < 0) throw DataError(trial_name(p) + ": sentence_id must be >= 0");
    if (x.repetition != 0 && x.repetition != 1) {
      throw DataError(trial_name(p) + ": repetition must be 0 or 1");
    }
    if (x.samples() != s.samples()) {
      std::ostringstream os;
      os << "time alignment mismatch: " << trial_name(p) << " has T=" << x.samples() << " but "
         << target_name(p) << " has T=" << s.samples();
      throw DataError(os.str());
    }
    if (s.sample_rate_hz != x.sample_rate_hz) {
      throw DataError("sample rate mismatch between " + trial_name(p) + " and " + target_name(p));
    }
    if (static_cast<Eigen::Index>(s.freq_centers_hz.size()) != s.freqs()) {
      throw DataError(target_name(p) + ": freq_centers_hz length does not match row count");
    }
    for (std::size_t f = 0; f < s.freq_centers_hz.size(); ++f) {
      if (!(s.freq_centers_hz[f] > 0.0) || (f > 0 && !(s.freq_centers_hz[f] > s.freq_centers_hz[f - 1]))) {
        throw DataError(target_name(p) + ": freq_centers_hz must be positive and strictly increasing");
      }
    }
    require_finite(x.data, trial_name(p));
    require_finite(s.data, target_name(p));
    if (!keys.emplace(x.sentence_id, x.repetition, x.condition).second) {
      throw DataError("duplicate key: " + describe(p));
    }
    reps[{x.sentence_id, x.condition}].insert(x.repetition);
    ids.insert(x.sentence_id);
  }
  if (!pairs_.empty()) {
    const auto& first = pairs_.front();
    for (const auto& p : pairs_) {
      if (p.trial.channels() != first.trial.channels()) {
        std::ostringstream os;
        os << "channel count mismatch: " << trial_name(p) << " has C=" << p.trial.channels()
           << ", expected " << first.trial.channels();
        throw DataError(os.str());
      }
      if (p.target.freqs() != first.target.freqs()) {
        throw DataError("frequency count mismatch across dataset at " + target_name(p));
      }
      if (p.trial.sample_rate_hz != first.trial.sample_rate_hz) {
        throw DataError("sample rate mismatch across dataset at " + trial_name(p));
      }
    }
  }
  // Each condition that is present must cover every sentence with the same repetitions.
  std::set<Condition> present;
  for (const auto& p : pairs_) present.insert(p.trial.condition);
  std::map<int, std::set<int>> reference;
  for (const auto& [key, r] : reps) {
    auto [it, inserted] = reference.emplace(key.first, r);
    if (!inserted && it->second != r) {
      throw DataError("sentence " + std::to_string(key.first) +
                      " has different repetition sets across conditions");
    }
  }
  for (Condition c : present) {
    for (int id : ids) {
      if (!reps.count({id, c})) {
        throw DataError("sentence " + std::to_string(id) + " missing from condition " +
                        std::string(to_string(c)));
      }
    }
  }
  sentence_ids_.assign(ids.begin(), ids.end());
}

Eigen::Index Dataset::channels() const { return pairs_.empty() ? 0 : pairs_.front().trial.channels(); }

Eigen::Index Dataset::freqs() const { return pairs_.empty() ? 0 : pairs_.front().target.freqs(); }

double Dataset::sample_rate_hz() const {
  return pairs_.empty() ? 0.0 : pairs_.front().trial.sample_rate_hz;
}

std::set<Condition> Dataset::conditions() const {
  std::set<Condition> out;
  for (const auto& p : pairs_) out.insert(p.trial.condition);
  return out;
}

TrialSet Dataset::select(Condition c, const std::set<int>& ids) const {
  TrialSet out;
  for (const auto& p : pairs_) {
    if (p.trial.condition == c && ids.count(p.trial.sentence_id)) out.emplace_back(p);
  }
  return out;
}

TrialSet Dataset::select(Condition c) const {
  TrialSet out;
  for (const auto& p : pairs_) {
    if (p.trial.condition == c) out.emplace_back(p);
  }
  return out;
}

}  // namespace xcond
