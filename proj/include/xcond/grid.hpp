#pragma once

#include "xcond/metrics.hpp"
#include "xcond/nn.hpp"
#include "xcond/nulls.hpp"
#include "xcond/ridge.hpp"
#include "xcond/split.hpp"
#include "xcond/stats.hpp"
#include "xcond/types.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace xcond {

// A fitted decoder of either family, seen through its reconstruction.
class Model {
 public:
  virtual ~Model() = default;
  virtual Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const = 0;
};

// What a family learned while fitting on real data; null refits reuse it.
struct FitInfo {
  double alpha = 0.0;
  std::optional<AlphaSearch> search;
  std::vector<nn::EpochLoss> history;
  int best_epoch = 0;
};

class Family {
 public:
  virtual ~Family() = default;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<Model> fit(const TrialSet& train, const TrialSet& val, Condition c, std::uint64_t seed,
                                     FitInfo& info) const = 0;
  // Fit on (null) data with the hyperparameters chosen in `info`.
  virtual std::unique_ptr<Model> refit(const TrialSet& train, const TrialSet& val, Condition c, std::uint64_t seed,
                                       const FitInfo& info) const = 0;
};

class LinearModel : public Model {
 public:
  explicit LinearModel(LinearDecoder d) : decoder_(std::move(d)) {}
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const override { return xcond::predict(decoder_, x); }
  const LinearDecoder& decoder() const { return decoder_; }

 private:
  LinearDecoder decoder_;
};

class LinearFamily : public Family {
 public:
  LinearFamily(LagSpec lags, std::vector<double> grid, FitOptions options = {})
      : lags_(std::move(lags)), grid_(std::move(grid)), options_(options) {}
  std::string name() const override { return "linear"; }
  std::unique_ptr<Model> fit(const TrialSet& train, const TrialSet& val, Condition c, std::uint64_t seed,
                             FitInfo& info) const override;
  std::unique_ptr<Model> refit(const TrialSet& train, const TrialSet& val, Condition c, std::uint64_t seed,
                               const FitInfo& info) const override;

 private:
  LagSpec lags_;
  std::vector<double> grid_;
  FitOptions options_;
};

// Network plus the affine input/target standardization fitted on its training fold.
class NonlinearModel : public Model {
 public:
  NonlinearModel(nn::NonlinearDecoder net, Eigen::VectorXd in_mean, Eigen::VectorXd in_scale, Eigen::VectorXd out_mean,
                 Eigen::VectorXd out_scale);
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const override;
  const nn::NonlinearDecoder& network() const { return net_; }

 private:
  nn::NonlinearDecoder net_;
  Eigen::VectorXd in_mean_, in_scale_, out_mean_, out_scale_;
};

struct NonlinearSettings {
  Eigen::Index hidden = 32;
  Eigen::Index kernel = 9;
  nn::TrainConfig train;
};

class NonlinearFamily : public Family {
 public:
  explicit NonlinearFamily(NonlinearSettings settings) : settings_(settings) {}
  std::string name() const override { return "nonlinear"; }
  std::unique_ptr<Model> fit(const TrialSet& train, const TrialSet& val, Condition c, std::uint64_t seed,
                             FitInfo& info) const override;
  std::unique_ptr<Model> refit(const TrialSet& train, const TrialSet& val, Condition c, std::uint64_t seed,
                               const FitInfo& info) const override;

 private:
  NonlinearSettings settings_;
};

struct TrialScore {
  int sentence_id = 0;
  int repetition = 0;
  double env_corr = 0.0;   // NaN when undefined
  double spec_corr = 0.0;  // NaN when undefined
};

struct CellResult {
  Condition train = Condition::Vocalized;
  Condition test = Condition::Vocalized;
  int n = 0;  // scored test trials
  std::vector<TrialScore> trials;
  double mean_env_corr = 0.0;
  double mean_spec_corr = 0.0;
  std::optional<TopKCurve> curve;
  int undefined_comparisons = 0;
  std::uint64_t seed = 0;

  // Filled by attach_nulls.
  std::vector<double> null_trial_corrs;        // pooled over realizations
  std::vector<double> null_realization_means;  // one per realization
  std::optional<StatResult> stat;              // permutation test, observed vs pooled null
  double p_realization = 1.0;                  // add-one over realization means
  bool underpowered = false;
};

struct GridReport {
  std::string family;
  std::array<std::array<CellResult, 3>, 3> cells{};  // [train][test]
  std::array<FitInfo, 3> fits{};
  SplitPlan split;
  std::uint64_t seed = 0;
  bool has_nulls = false;
  NullSpec null_spec;

  CellResult& cell(Condition train, Condition test) { return cells[index_of(train)][index_of(test)]; }
  const CellResult& cell(Condition train, Condition test) const { return cells[index_of(train)][index_of(test)]; }
};

// Per-trial scores and rank analysis of `model` on `test`, using the repetition-averaged
// targets of the test sentences as the gallery.
CellResult score_cell(const Model& model, const TrialSet& test);

// Fits one decoder per training condition on the train fold (hyperparameters from the
// validation fold) and scores it on the test fold of every condition. All cells share
// the test sentence ids.
GridReport evaluate_grid(const Dataset& dataset, const SplitPlan& split, const Family& family, std::uint64_t seed);

// Refits `spec.n_realizations` null decoders per training condition and attaches null
// distributions and statistics to every cell.
void attach_nulls(const Dataset& dataset, const Family& family, const NullSpec& spec, long n_permutations,
                  GridReport& report);

}  // namespace xcond
