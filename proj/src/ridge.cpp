#include "xcond/ridge.hpp"

#include "xcond/error.hpp"
#include "xcond/metrics.hpp"

#include <cmath>
#include <limits>

namespace xcond {

namespace {

// Relative pivot threshold below which an unregularized normal matrix counts as singular.
constexpr double kSingularThreshold = 1e-12;

Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& normal, const Eigen::MatrixXd& rhs, double alpha) {
  if (alpha == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
    qr.setThreshold(kSingularThreshold);
    if (qr.rank() < normal.rows()) {
      throw SingularSystem("normal matrix is singular (rank " + std::to_string(qr.rank()) + " of " +
                           std::to_string(normal.rows()) + ") and alpha = 0");
    }
    return qr.solve(rhs);
  }
  Eigen::MatrixXd reg = normal;
  reg.diagonal().array() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) throw NumericError("regularized normal matrix is not positive definite");
  return llt.solve(rhs);
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
}

}  // namespace

RidgeSolver::RidgeSolver(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets)
    : RidgeSolver(std::vector<Eigen::MatrixXd>{design}, std::vector<Eigen::MatrixXd>{targets}) {}

RidgeSolver::RidgeSolver(const std::vector<Eigen::MatrixXd>& designs, const std::vector<Eigen::MatrixXd>& targets) {
  if (designs.size() != targets.size() || designs.empty()) {
    throw DataError("ridge: need matching, nonempty design and target lists");
  }
  features_ = designs.front().rows();
  const Eigen::Index f_count = targets.front().rows();
  for (std::size_t i = 0; i < designs.size(); ++i) {
    if (designs[i].rows() != features_ || targets[i].rows() != f_count) {
      throw DataError("ridge: inconsistent design or target row counts across blocks");
    }
    if (designs[i].cols() != targets[i].cols()) {
      throw DataError("ridge: design has " + std::to_string(designs[i].cols()) + " columns but targets have " +
                      std::to_string(targets[i].cols()));
    }
    samples_ += designs[i].cols();
  }
  gram_form_ = features_ > samples_;
  if (gram_form_) {
    design_.resize(features_, samples_);
    cross_.resize(samples_, f_count);
    Eigen::Index offset = 0;
    for (std::size_t i = 0; i < designs.size(); ++i) {
      design_.middleCols(offset, designs[i].cols()) = designs[i];
      cross_.middleRows(offset, designs[i].cols()) = targets[i].transpose();
      offset += designs[i].cols();
    }
    normal_ = design_.transpose() * design_;
  } else {
    normal_ = Eigen::MatrixXd::Zero(features_, features_);
    cross_ = Eigen::MatrixXd::Zero(features_, f_count);
    for (std::size_t i = 0; i < designs.size(); ++i) {
      normal_.selfadjointView<Eigen::Lower>().rankUpdate(designs[i]);
      cross_.noalias() += designs[i] * targets[i].transpose();
    }
    normal_ = normal_.selfadjointView<Eigen::Lower>();
  }
}

Eigen::MatrixXd RidgeSolver::solve(double alpha) const {
  check_alpha(alpha);
  if (gram_form_) {
    if (alpha == 0.0) {
      throw SingularSystem("normal matrix is singular (more features than samples) and alpha = 0");
    }
    return design_ * solve_spd(normal_, cross_, alpha);
  }
  return solve_spd(normal_, cross_, alpha);
}

LinearDecoder fit_ridge(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets, double alpha,
                        const LagSpec& lagspec, Condition trained_on) {
  check_alpha(alpha);
  if (lagspec.size() == 0 || design.rows() % lagspec.size() != 0) {
    throw DataError("ridge: design rows are not a multiple of the lag count");
  }
  LinearDecoder d;
  d.G = RidgeSolver(design, targets).solve(alpha);
  d.lagspec = lagspec;
  d.alpha = alpha;
  d.trained_on = trained_on;
  d.intercept = Eigen::VectorXd::Zero(targets.rows());
  return d;
}

Eigen::MatrixXd predict(const LinearDecoder& decoder, const Eigen::MatrixXd& x) {
  if (x.rows() != decoder.channels()) {
    throw DataError("decoder expects " + std::to_string(decoder.channels()) + " channels, trial has " +
                    std::to_string(x.rows()));
  }
  Eigen::MatrixXd out = decoder.G.transpose() * build_lag_matrix(x, decoder.lagspec);
  if (decoder.intercept.size() == out.rows()) out.colwise() += decoder.intercept;
  return out;
}

StimulusSpectrogram predict(const LinearDecoder& decoder, const NeuralTrial& trial) {
  StimulusSpectrogram s;
  s.data = predict(decoder, trial.data);
  s.sample_rate_hz = trial.sample_rate_hz;
  for (Eigen::Index f = 0; f < s.data.rows(); ++f) s.freq_centers_hz.push_back(f + 1.0);
  return s;
}

namespace {

struct PreparedFit {
  Eigen::VectorXd channel_scale;  // multiply raw channel by this before lagging
  Eigen::VectorXd target_mean;
  std::vector<Eigen::MatrixXd> designs;
  std::vector<Eigen::MatrixXd> targets;
};

PreparedFit prepare(const TrialSet& train, const LagSpec& lagspec, const FitOptions& options) {
  if (train.empty()) throw DataError("ridge: empty training set");
  const Eigen::Index c_count = train.front().get().trial.channels();
  const Eigen::Index f_count = train.front().get().target.freqs();
  PreparedFit p;
  p.channel_scale = Eigen::VectorXd::Ones(c_count);
  p.target_mean = Eigen::VectorXd::Zero(f_count);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(c_count), sumsq = Eigen::VectorXd::Zero(c_count);
  Eigen::VectorXd tsum = Eigen::VectorXd::Zero(f_count);
  double n = 0.0;
  for (const TrialPair& pair : train) {
    if (pair.trial.channels() != c_count || pair.target.freqs() != f_count) {
      throw DataError("ridge: training trials disagree in channel or frequency count");
    }
    sum += pair.trial.data.rowwise().sum();
    sumsq += pair.trial.data.array().square().matrix().rowwise().sum();
    tsum += pair.target.data.rowwise().sum();
    n += static_cast<double>(pair.trial.samples());
  }
  if (options.standardize && n > 1.0) {
    for (Eigen::Index c = 0; c < c_count; ++c) {
      const double mean = sum[c] / n;
      const double var = std::max(0.0, sumsq[c] / n - mean * mean);
      if (var > 0.0) p.channel_scale[c] = 1.0 / std::sqrt(var);
    }
  }
  if (options.center_targets) p.target_mean = tsum / n;
  for (const TrialPair& pair : train) {
    p.designs.push_back(build_lag_matrix(p.channel_scale.asDiagonal() * pair.trial.data, lagspec));
    p.targets.push_back(pair.target.data.colwise() - p.target_mean);
  }
  return p;
}

LinearDecoder assemble(const PreparedFit& p, Eigen::MatrixXd g_scaled, const LagSpec& lagspec, double alpha,
                       Condition trained_on) {
  const Eigen::Index n_lags = lagspec.size();
  for (Eigen::Index c = 0; c < p.channel_scale.size(); ++c) {
    g_scaled.middleRows(c * n_lags, n_lags) *= p.channel_scale[c];
  }
  LinearDecoder d;
  d.G = std::move(g_scaled);
  d.lagspec = lagspec;
  d.alpha = alpha;
  d.trained_on = trained_on;
  d.intercept = p.target_mean;
  return d;
}

}  // namespace

LinearDecoder fit_linear_decoder(const TrialSet& train, const LagSpec& lagspec, double alpha, Condition trained_on,
                                 const FitOptions& options) {
  check_alpha(alpha);
  const PreparedFit p = prepare(train, lagspec, options);
  return assemble(p, RidgeSolver(p.designs, p.targets).solve(alpha), lagspec, alpha, trained_on);
}

AlphaSearch grid_search_alpha(const TrialSet& train, const TrialSet& val, const LagSpec& lagspec,
                              const std::vector<double>& grid, const FitOptions& options) {
  if (grid.empty()) throw ConfigError("alpha grid must not be empty");
  for (double a : grid) check_alpha(a);
  AlphaSearch out;
  out.grid = grid;
  if (grid.size() == 1) {
    out.alpha_star = grid.front();
    out.scores.assign(1, std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  if (val.empty()) throw DataError("alpha grid search needs a nonempty validation set");
  const PreparedFit p = prepare(train, lagspec, options);
  const RidgeSolver solver(p.designs, p.targets);
  std::vector<Eigen::MatrixXd> val_designs;
  for (const TrialPair& pair : val) {
    val_designs.push_back(build_lag_matrix(p.channel_scale.asDiagonal() * pair.trial.data, lagspec));
  }
  bool any = false;
  for (double a : grid) {
    const Eigen::MatrixXd g = solver.solve(a);
    double total = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      const Eigen::MatrixXd pred = g.transpose() * val_designs[i];
      if (auto r = try_pearson(envelope(pred), envelope(val[i].get().target.data))) {
        total += *r;
        ++count;
      }
    }
    out.scores.push_back(count ? total / count : std::numeric_limits<double>::quiet_NaN());
    any = any || count > 0;
  }
  if (!any) throw NumericError("alpha grid search: every validation correlation is undefined");
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = out.scores[i];
    if (std::isnan(s)) continue;
    if (s > best + 1e-12 || (std::abs(s - best) <= 1e-12 && grid[i] > out.alpha_star)) {
      if (s > best) best = s;
      out.alpha_star = grid[i];
    }
  }
  return out;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> g;
  for (int i = 0; i < 13; ++i) g.push_back(std::pow(10.0, -2.0 + 0.5 * i));
  return g;
}

}  // namespace xcond
