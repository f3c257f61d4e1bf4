#pragma once

#include "oracles.hpp"
#include "xcond/types.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testutil {

// Random dataset: each (sentence, condition) has two repetitions; the target is
// shared across repetitions and conditions of a sentence.
inline std::vector<xcond::TrialPair> random_pairs(int n_sentences, Eigen::Index channels, Eigen::Index freqs,
                                                  Eigen::Index samples, std::uint64_t seed,
                                                  std::vector<xcond::Condition> conds = {xcond::kConditions.begin(),
                                                                                         xcond::kConditions.end()}) {
  std::mt19937_64 rng(seed);
  std::vector<xcond::TrialPair> pairs;
  for (int s = 0; s < n_sentences; ++s) {
    const Eigen::MatrixXd target = oracle::random_matrix(freqs, samples, rng);
    for (int rep = 0; rep < 2; ++rep) {
      for (auto c : conds) {
        xcond::TrialPair p;
        p.trial.data = oracle::random_matrix(channels, samples, rng);
        p.trial.sample_rate_hz = 100.0;
        p.trial.sentence_id = s;
        p.trial.repetition = rep;
        p.trial.condition = c;
        p.target.data = target;
        p.target.sample_rate_hz = 100.0;
        for (Eigen::Index f = 0; f < freqs; ++f) p.target.freq_centers_hz.push_back(100.0 * (f + 1));
        pairs.push_back(std::move(p));
      }
    }
  }
  return pairs;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("xcond_test_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
