#pragma once

#include "xcond/types.hpp"

#include <Eigen/Dense>

#include <vector>

namespace xcond {

// Ordered set of sample lags. A positive lag l uses the neural sample X(t - l) to
// predict the stimulus at time t.
class LagSpec {
 public:
  LagSpec() = default;
  // Throws ConfigError unless `lags` is nonempty and strictly increasing.
  explicit LagSpec(std::vector<int> lags);

  // Inclusive range lo..hi.
  static LagSpec range(int lo, int hi);
  // 0..ceil(window_ms / 1000 * sample_rate_hz).
  static LagSpec from_window(double sample_rate_hz, double window_ms);

  const std::vector<int>& lags() const { return lags_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(lags_.size()); }
  int max_abs() const;

  bool operator==(const LagSpec&) const = default;

 private:
  std::vector<int> lags_;
};

// (C*|L|) x T design; row c*|L| + i at column t holds X(c, t - lags[i]), zero outside
// the trial. Throws DataError if some |lag| >= T.
Eigen::MatrixXd build_lag_matrix(const Eigen::MatrixXd& x, const LagSpec& lagspec);
Eigen::MatrixXd build_lag_matrix(const NeuralTrial& trial, const LagSpec& lagspec);

}  // namespace xcond
