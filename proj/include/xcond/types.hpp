#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace xcond {

enum class Condition { Vocalized = 0, Mimed = 1, Imagined = 2 };

inline constexpr std::array<Condition, 3> kConditions{Condition::Vocalized, Condition::Mimed,
                                                      Condition::Imagined};

std::string_view to_string(Condition c);
// Accepts "vocalized"/"mimed"/"imagined" (case-insensitive) or "V"/"M"/"I".
Condition parse_condition(std::string_view s);
inline std::size_t index_of(Condition c) { return static_cast<std::size_t>(c); }

// One trial's neural response, channels x time.
struct NeuralTrial {
  Eigen::MatrixXd data;
  double sample_rate_hz = 0.0;
  int sentence_id = 0;
  int repetition = 0;
  Condition condition = Condition::Vocalized;

  Eigen::Index channels() const { return data.rows(); }
  Eigen::Index samples() const { return data.cols(); }
};

// Frequency x time target aligned to a trial.
struct StimulusSpectrogram {
  Eigen::MatrixXd data;
  std::vector<double> freq_centers_hz;
  double sample_rate_hz = 0.0;

  Eigen::Index freqs() const { return data.rows(); }
  Eigen::Index samples() const { return data.cols(); }
};

struct TrialPair {
  NeuralTrial trial;
  StimulusSpectrogram target;
  // Source files, empty for in-memory data. Used in error messages.
  std::string trial_path;
  std::string target_path;
};

using TrialSet = std::vector<std::reference_wrapper<const TrialPair>>;

// Validated, immutable collection of trial/spectrogram pairs.
class Dataset {
 public:
  Dataset() = default;
  // Throws DataError when any invariant is violated.
  explicit Dataset(std::vector<TrialPair> pairs);

  const std::vector<TrialPair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  std::size_t n_sentences() const { return sentence_ids_.size(); }
  const std::vector<int>& sentence_ids() const { return sentence_ids_; }
  Eigen::Index channels() const;
  Eigen::Index freqs() const;
  double sample_rate_hz() const;
  std::set<Condition> conditions() const;

  // Pairs of one condition whose sentence id is in `ids`, in dataset order.
  TrialSet select(Condition c, const std::set<int>& ids) const;
  TrialSet select(Condition c) const;

 private:
  std::vector<TrialPair> pairs_;
  std::vector<int> sentence_ids_;
};

// Throws DataError if any entry is NaN or infinite.
void require_finite(const Eigen::MatrixXd& m, const std::string& what);

}  // namespace xcond
