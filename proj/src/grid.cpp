#include "xcond/grid.hpp"

#include "xcond/error.hpp"
#include "xcond/parallel.hpp"
#include "xcond/rng.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace xcond {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double nan_mean(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (!std::isnan(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / n : kNaN;
}

}  // namespace

std::unique_ptr<Model> LinearFamily::fit(const TrialSet& train, const TrialSet& val, Condition c, std::uint64_t,
                                         FitInfo& info) const {
  info.search = grid_search_alpha(train, val, lags_, grid_, options_);
  info.alpha = info.search->alpha_star;
  return std::make_unique<LinearModel>(fit_linear_decoder(train, lags_, info.alpha, c, options_));
}

std::unique_ptr<Model> LinearFamily::refit(const TrialSet& train, const TrialSet&, Condition c, std::uint64_t,
                                           const FitInfo& info) const {
  return std::make_unique<LinearModel>(fit_linear_decoder(train, lags_, info.alpha, c, options_));
}

NonlinearModel::NonlinearModel(nn::NonlinearDecoder net, Eigen::VectorXd in_mean, Eigen::VectorXd in_scale,
                               Eigen::VectorXd out_mean, Eigen::VectorXd out_scale)
    : net_(std::move(net)),
      in_mean_(std::move(in_mean)),
      in_scale_(std::move(in_scale)),
      out_mean_(std::move(out_mean)),
      out_scale_(std::move(out_scale)) {}

Eigen::MatrixXd NonlinearModel::predict(const Eigen::MatrixXd& x) const {
  if (x.rows() != in_mean_.size()) {
    throw DataError("network expects " + std::to_string(in_mean_.size()) + " channels, trial has " +
                    std::to_string(x.rows()));
  }
  const Eigen::MatrixXd z = in_scale_.asDiagonal() * (x.colwise() - in_mean_);
  Eigen::MatrixXd y = out_scale_.asDiagonal() * nn::forward(net_, z);
  y.colwise() += out_mean_;
  return y;
}

namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // 1 / sd, 1 where the sd is zero
  Eigen::VectorXd sd;     // sd, 1 where zero
};

Moments row_moments(const TrialSet& set, bool use_target) {
  const Eigen::Index rows = use_target ? set.front().get().target.freqs() : set.front().get().trial.channels();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(rows), sumsq = Eigen::VectorXd::Zero(rows);
  double n = 0.0;
  for (const TrialPair& p : set) {
    const Eigen::MatrixXd& m = use_target ? p.target.data : p.trial.data;
    sum += m.rowwise().sum();
    sumsq += m.array().square().matrix().rowwise().sum();
    n += static_cast<double>(m.cols());
  }
  Moments out;
  out.mean = sum / n;
  out.scale = Eigen::VectorXd::Ones(rows);
  out.sd = Eigen::VectorXd::Ones(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double var = std::max(0.0, sumsq[i] / n - out.mean[i] * out.mean[i]);
    if (var > 0.0) {
      out.sd[i] = std::sqrt(var);
      out.scale[i] = 1.0 / out.sd[i];
    }
  }
  return out;
}

std::vector<nn::SequencePair> standardized(const TrialSet& set, const Moments& in, const Moments& out) {
  std::vector<nn::SequencePair> v;
  v.reserve(set.size());
  for (const TrialPair& p : set) {
    v.push_back({in.scale.asDiagonal() * (p.trial.data.colwise() - in.mean),
                 out.scale.asDiagonal() * (p.target.data.colwise() - out.mean)});
  }
  return v;
}

std::unique_ptr<Model> train_network(const NonlinearSettings& s, const TrialSet& train, const TrialSet& val,
                                     std::uint64_t seed, FitInfo& info) {
  if (train.empty()) throw DataError("nonlinear fit: empty training set");
  const Moments in = row_moments(train, false);
  const Moments out = row_moments(train, true);
  const auto train_seq = standardized(train, in, out);
  const auto val_seq = standardized(val, in, out);
  const auto init = nn::init_decoder(in.mean.size(), out.mean.size(), s.hidden, s.kernel, derive_seed(seed, 1));
  nn::TrainConfig cfg = s.train;
  cfg.seed = derive_seed(seed, 2);
  auto result = nn::train(init, train_seq, val_seq, cfg);
  info.history = result.history;
  info.best_epoch = result.best_epoch;
  return std::make_unique<NonlinearModel>(std::move(result.decoder), in.mean, in.scale, out.mean, out.sd);
}

}  // namespace

std::unique_ptr<Model> NonlinearFamily::fit(const TrialSet& train, const TrialSet& val, Condition, std::uint64_t seed,
                                            FitInfo& info) const {
  return train_network(settings_, train, val, seed, info);
}

std::unique_ptr<Model> NonlinearFamily::refit(const TrialSet& train, const TrialSet& val, Condition,
                                              std::uint64_t seed, const FitInfo&) const {
  FitInfo scratch;
  return train_network(settings_, train, val, seed, scratch);
}

CellResult score_cell(const Model& model, const TrialSet& test) {
  CellResult cell;
  std::vector<LabeledEnvelope> queries;
  std::map<int, std::vector<Eigen::VectorXd>> targets;
  for (const TrialPair& p : test) {
    const Eigen::MatrixXd pred = model.predict(p.trial.data);
    TrialScore s;
    s.sentence_id = p.trial.sentence_id;
    s.repetition = p.trial.repetition;
    const Eigen::VectorXd env = envelope(pred);
    const Eigen::VectorXd target_env = envelope(p.target.data);
    s.env_corr = try_pearson(env, target_env).value_or(kNaN);
    s.spec_corr = try_pearson(pred.reshaped(), p.target.data.reshaped()).value_or(kNaN);
    cell.trials.push_back(s);
    queries.push_back({s.sentence_id, env});
    targets[s.sentence_id].push_back(target_env);
  }
  std::vector<double> env, spec;
  for (const auto& s : cell.trials) {
    env.push_back(s.env_corr);
    spec.push_back(s.spec_corr);
  }
  cell.n = static_cast<int>(cell.trials.size());
  cell.mean_env_corr = nan_mean(env);
  cell.mean_spec_corr = nan_mean(spec);
  if (targets.size() >= 2) {
    std::vector<LabeledEnvelope> gallery;
    for (const auto& [id, envs] : targets) {
      Eigen::Index len = envs.front().size();
      for (const auto& e : envs) len = std::min(len, e.size());
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(len);
      for (const auto& e : envs) avg += e.head(len);
      gallery.push_back({id, avg / static_cast<double>(envs.size())});
    }
    const RankAnalysis ra = rank_analysis(queries, gallery);
    cell.curve = ra.curve;
    cell.undefined_comparisons = ra.undefined_comparisons;
  }
  return cell;
}

GridReport evaluate_grid(const Dataset& dataset, const SplitPlan& split, const Family& family, std::uint64_t seed) {
  GridReport report;
  report.family = family.name();
  report.split = split;
  report.seed = seed;
  std::array<std::unique_ptr<Model>, 3> models;
  parallel_for(3, [&](std::size_t ci) {
    const Condition c = kConditions[ci];
    const TrialSet train = dataset.select(c, split.train_ids);
    const TrialSet val = dataset.select(c, split.val_ids);
    if (train.empty()) throw DataError(std::string("no training trials for condition ") + std::string(to_string(c)));
    try {
      models[ci] = family.fit(train, val, c, derive_seed(seed, ci), report.fits[ci]);
    } catch (const Error&) {
      rethrow_with_context("fitting " + family.name() + " decoder on " + std::string(to_string(c)) + ": ");
    }
  });
  parallel_for(9, [&](std::size_t job) {
    const Condition tr = kConditions[job / 3], te = kConditions[job % 3];
    const TrialSet test = dataset.select(te, split.test_ids);
    try {
      CellResult cell = score_cell(*models[job / 3], test);
      cell.train = tr;
      cell.test = te;
      cell.seed = seed;
      report.cell(tr, te) = std::move(cell);
    } catch (const Error&) {
      rethrow_with_context("cell (" + std::string(to_string(tr)) + " -> " + std::string(to_string(te)) + "): ");
    }
  });
  return report;
}

void attach_nulls(const Dataset& dataset, const Family& family, const NullSpec& spec, long n_permutations,
                  GridReport& report) {
  if (spec.n_realizations < 1) throw ConfigError("null spec needs n_realizations >= 1");
  const auto& split = report.split;
  const std::size_t realizations = static_cast<std::size_t>(spec.n_realizations);
  // [train][realization][test] -> per-trial env correlations
  std::vector<std::vector<std::array<std::vector<double>, 3>>> scores(
      3, std::vector<std::array<std::vector<double>, 3>>(realizations));
  parallel_for(3 * realizations, [&](std::size_t job) {
    const std::size_t ci = job / realizations, r = job % realizations;
    const Condition c = kConditions[ci];
    NullSpec per = spec;
    per.seed = derive_seed(spec.seed, 100 + ci);
    const TrialSet train = dataset.select(c, split.train_ids);
    const TrialSet val = dataset.select(c, split.val_ids);
    const auto null_train = make_null_pairs(train, per, static_cast<int>(r));
    NullSpec per_val = per;
    per_val.seed = derive_seed(per.seed, 7);
    std::vector<TrialPair> null_val;
    std::set<int> val_sentences;
    for (const TrialPair& p : val) val_sentences.insert(p.trial.sentence_id);
    // A validation fold of one sentence has no derangement; the refit then skips it.
    if (val_sentences.size() >= 2) null_val = make_null_pairs(val, per_val, static_cast<int>(r));
    TrialSet train_set(null_train.begin(), null_train.end());
    TrialSet val_set(null_val.begin(), null_val.end());
    const auto model = family.refit(train_set, val_set, c, derive_seed(report.seed, 1000 + job), report.fits[ci]);
    for (std::size_t ti = 0; ti < 3; ++ti) {
      const TrialSet test = dataset.select(kConditions[ti], split.test_ids);
      for (const TrialPair& p : test) {
        const Eigen::MatrixXd pred = model->predict(p.trial.data);
        scores[ci][r][ti].push_back(try_pearson(envelope(pred), envelope(p.target.data)).value_or(kNaN));
      }
    }
  });
  for (std::size_t ci = 0; ci < 3; ++ci) {
    for (std::size_t ti = 0; ti < 3; ++ti) {
      CellResult& cell = report.cells[ci][ti];
      cell.null_trial_corrs.clear();
      cell.null_realization_means.clear();
      for (std::size_t r = 0; r < realizations; ++r) {
        for (double v : scores[ci][r][ti]) {
          if (!std::isnan(v)) cell.null_trial_corrs.push_back(v);
        }
        cell.null_realization_means.push_back(nan_mean(scores[ci][r][ti]));
      }
      std::vector<double> observed;
      for (const auto& t : cell.trials) {
        if (!std::isnan(t.env_corr)) observed.push_back(t.env_corr);
      }
      if (!observed.empty() && !cell.null_trial_corrs.empty()) {
        cell.stat = permutation_pvalue(observed, cell.null_trial_corrs, Alternative::Greater, n_permutations,
                                       derive_seed(report.seed, 5000 + 3 * ci + ti));
      }
      int hits = 0;
      for (double m : cell.null_realization_means) hits += (!std::isnan(m) && m >= cell.mean_env_corr) ? 1 : 0;
      cell.p_realization = static_cast<double>(1 + hits) / static_cast<double>(1 + realizations);
      cell.underpowered = 1.0 / static_cast<double>(1 + realizations) > 0.05;
    }
  }
  report.has_nulls = true;
  report.null_spec = spec;
}

}  // namespace xcond
