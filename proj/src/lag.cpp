#include "xcond/lag.hpp"

#include "xcond/error.hpp"

#include <cmath>
#include <cstdlib>

namespace xcond {

LagSpec::LagSpec(std::vector<int> lags) : lags_(std::move(lags)) {
  if (lags_.empty()) throw ConfigError("lag set must not be empty");
  for (std::size_t i = 1; i < lags_.size(); ++i) {
    if (lags_[i] <= lags_[i - 1]) throw ConfigError("lags must be strictly increasing");
  }
}

LagSpec LagSpec::range(int lo, int hi) {
  if (hi < lo) throw ConfigError("lag range is empty");
  std::vector<int> v;
  for (int l = lo; l <= hi; ++l) v.push_back(l);
  return LagSpec(std::move(v));
}

LagSpec LagSpec::from_window(double sample_rate_hz, double window_ms) {
  if (!(sample_rate_hz > 0.0) || !(window_ms >= 0.0)) throw ConfigError("lag window needs positive rate and window >= 0");
  // Guard against 0.2 * 100 landing a hair above 20.
  const double samples = window_ms / 1000.0 * sample_rate_hz;
  return range(0, static_cast<int>(std::ceil(samples - 1e-9)));
}

int LagSpec::max_abs() const {
  int m = 0;
  for (int l : lags_) m = std::max(m, std::abs(l));
  return m;
}

Eigen::MatrixXd build_lag_matrix(const Eigen::MatrixXd& x, const LagSpec& lagspec) {
  if (lagspec.size() == 0) throw ConfigError("lag set must not be empty");
  const Eigen::Index c_count = x.rows(), t_count = x.cols(), n_lags = lagspec.size();
  if (lagspec.max_abs() >= t_count) {
    throw DataError("lag " + std::to_string(lagspec.max_abs()) + " does not fit a trial of " +
                    std::to_string(t_count) + " samples");
  }
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(c_count * n_lags, t_count);
  for (Eigen::Index c = 0; c < c_count; ++c) {
    for (Eigen::Index i = 0; i < n_lags; ++i) {
      const Eigen::Index l = lagspec.lags()[i];
      const Eigen::Index row = c * n_lags + i;
      const Eigen::Index begin = std::max<Eigen::Index>(0, l);
      const Eigen::Index end = std::min(t_count, t_count + l);
      if (end > begin) design.row(row).segment(begin, end - begin) = x.row(c).segment(begin - l, end - begin);
    }
  }
  return design;
}

Eigen::MatrixXd build_lag_matrix(const NeuralTrial& trial, const LagSpec& lagspec) {
  return build_lag_matrix(trial.data, lagspec);
}

}  // namespace xcond
