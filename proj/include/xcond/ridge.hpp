#pragma once

#include "xcond/lag.hpp"
#include "xcond/types.hpp"

#include <Eigen/Dense>

#include <vector>

namespace xcond {

// Linear reconstruction S_hat = G^T lag(X) + intercept.
struct LinearDecoder {
  Eigen::MatrixXd G;          // (C*|L|) x F
  LagSpec lagspec;
  double alpha = 0.0;
  Condition trained_on = Condition::Vocalized;
  Eigen::VectorXd intercept;  // length F; zero for a raw ridge fit

  Eigen::Index channels() const { return lagspec.size() ? G.rows() / lagspec.size() : 0; }
  Eigen::Index freqs() const { return G.cols(); }
};

// Ridge solution G = (X X^T + alpha I)^-1 X S^T for a design X (P x T) and targets
// S (F x T). Uses the P x P normal equations when P <= T and the equivalent T x T
// Gram form X (X^T X + alpha I)^-1 S^T otherwise. alpha == 0 with a singular normal
// matrix throws SingularSystem.
class RidgeSolver {
 public:
  RidgeSolver(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets);
  // Same system assembled from per-trial blocks without materialising the concatenation
  // in the normal-equation form.
  RidgeSolver(const std::vector<Eigen::MatrixXd>& designs, const std::vector<Eigen::MatrixXd>& targets);

  Eigen::MatrixXd solve(double alpha) const;
  bool uses_gram_form() const { return gram_form_; }
  Eigen::Index features() const { return features_; }
  Eigen::Index samples() const { return samples_; }

 private:
  Eigen::Index features_ = 0;
  Eigen::Index samples_ = 0;
  bool gram_form_ = false;
  Eigen::MatrixXd normal_;  // X X^T, or X^T X in Gram form
  Eigen::MatrixXd cross_;   // X S^T, or S^T in Gram form
  Eigen::MatrixXd design_;  // kept only in Gram form
};

// Plain ridge fit on an already-lagged design; zero intercept.
LinearDecoder fit_ridge(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets, double alpha,
                        const LagSpec& lagspec, Condition trained_on = Condition::Vocalized);

Eigen::MatrixXd predict(const LinearDecoder& decoder, const Eigen::MatrixXd& x);
// Throws DataError on a channel mismatch.
StimulusSpectrogram predict(const LinearDecoder& decoder, const NeuralTrial& trial);

struct FitOptions {
  // Divide each channel by its training-fold standard deviation; the scale is folded
  // back into G so the decoder consumes raw data.
  bool standardize = true;
  // Fit against training-mean-centred targets and store the mean as the intercept.
  bool center_targets = true;
};

LinearDecoder fit_linear_decoder(const TrialSet& train, const LagSpec& lagspec, double alpha,
                                 Condition trained_on, const FitOptions& options = {});

struct AlphaSearch {
  double alpha_star = 0.0;
  std::vector<double> grid;
  std::vector<double> scores;  // mean validation envelope correlation, NaN if undefined
};

// Picks the alpha with the highest mean validation envelope correlation; scores within
// 1e-12 of each other count as ties and go to the larger alpha. A singleton grid is
// returned without fitting.
AlphaSearch grid_search_alpha(const TrialSet& train, const TrialSet& val, const LagSpec& lagspec,
                              const std::vector<double>& grid, const FitOptions& options = {});

// 13 log-spaced values 1e-2 .. 1e4.
std::vector<double> default_alpha_grid();

}  // namespace xcond
