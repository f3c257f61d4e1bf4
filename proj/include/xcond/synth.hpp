#pragma once

#include "xcond/grid.hpp"
#include "xcond/ridge.hpp"
#include "xcond/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace xcond {

// Hierarchical generator: per sentence, smooth latent time courses for planning (P),
// articulatory (A) and sensory (S) sources are mapped to channels through loading
// matrices, and the conditions are assembled as
//   imagined = X_P + E,  mimed = X_P + X_A + E,  vocalized = X_P + X_A + X_S + E
// with E neural noise shared by the three conditions of a (sentence, repetition).
struct SourceConfig {
  int planning_dims = 3;
  int articulatory_dims = 3;
  int sensory_dims = 3;
  double planning_amplitude = 1.0;
  double articulatory_amplitude = 1.0;
  double sensory_amplitude = 1.0;
  // Principal angle between span(L_A) and span(L_P); 90 means orthogonal.
  double articulatory_angle_deg = 90.0;
  // Principal angle between span(L_S) and the articulatory directions.
  double sensory_angle_deg = 90.0;
  double smoothing_sigma = 2.0;  // Gaussian low-pass width of the latents, in samples
  double planning_stimulus_weight = 1.0;
  double articulatory_stimulus_weight = 1.0;
  double sensory_stimulus_weight = 1.0;
  bool sensory_drives_stimulus = false;  // counterfactual: let X_S enter the targets
  int n_freqs = 8;
  int stimulus_delay = 5;  // stimulus at t depends on sources at t - delay
  double neural_noise = 0.1;
  double stimulus_noise = 0.1;
  double sample_rate_hz = 100.0;
};

struct TrialSources {
  int sentence_id = 0;
  int repetition = 0;
  Eigen::MatrixXd planning;      // X_P, C x T
  Eigen::MatrixXd articulatory;  // X_A
  Eigen::MatrixXd sensory;       // X_S
  Eigen::MatrixXd noise;         // E

  Eigen::MatrixXd imagined() const { return planning + noise; }
  Eigen::MatrixXd mimed() const { return planning + articulatory + noise; }
  Eigen::MatrixXd vocalized() const { return planning + articulatory + sensory + noise; }
  Eigen::MatrixXd condition(Condition c) const;
};

struct HierarchicalSources {
  SourceConfig config;
  Eigen::MatrixXd planning_loading;      // C x d_P, orthonormal columns
  Eigen::MatrixXd articulatory_loading;  // C x d_A, unit columns
  Eigen::MatrixXd sensory_loading;       // C x d_S, unit columns
  Eigen::MatrixXd planning_map;          // F x d_P, latent -> stimulus
  Eigen::MatrixXd articulatory_map;      // F x d_A
  Eigen::MatrixXd sensory_map;           // F x d_S
  std::vector<TrialSources> trials;      // one per (sentence, repetition)
};

struct SynthResult {
  Dataset dataset;
  HierarchicalSources sources;
};

// Throws ConfigError for infeasible dimensions (d_P + d_A + d_S > C, negative amplitudes,
// overlap angles that need d_A <= d_P or d_S <= d_A).
SynthResult generate(const SourceConfig& config, int n_sentences, Eigen::Index samples, Eigen::Index channels,
                     std::uint64_t seed);

struct ProjectionSplit {
  Eigen::MatrixXd parallel;
  Eigen::MatrixXd perpendicular;
  Eigen::MatrixXd basis;
};

// parallel = B B^T X. Throws DataError if B^T B deviates from I by more than 1e-8.
ProjectionSplit project_onto_subspace(const Eigen::MatrixXd& component, const Eigen::MatrixXd& basis);

// Orthonormal basis of the column space of `m` (numerical rank via SVD).
Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& m, double rel_tol = 1e-10);

struct TransferIdentityReport {
  double max_dev_vocalized_minus_mimed = 0.0;  // (a) |S_{->V} - S_{->M} - G^T lag(X_S)|
  double max_dev_mimed_minus_imagined = 0.0;   // (b) |S_{->M} - S_{->I} - G^T lag(X_A)|
  // (c) only for imagined-trained decoders: |G^T lag(X_A) - G^T lag(X_A_par)|, with
  // X_A_par the projection onto the planning loading subspace.
  std::optional<double> max_dev_parallel;
  // ||G^T lag(X_A_perp)||_F / ||G^T lag(X_P)||_F, worst case over trials (imagined only).
  std::optional<double> perpendicular_ratio;
  bool passed = false;  // (a) and (b) within tolerance
};

TransferIdentityReport verify_transfer_identities(const LinearDecoder& decoder, const HierarchicalSources& sources,
                                                  double tolerance = 1e-10);

struct OrderingOptions {
  int n_sentences = 20;
  Eigen::Index samples = 200;
  Eigen::Index channels = 16;
  double lag_window_ms = 200.0;
  double epsilon = 0.05;  // |M->M - M->V| bound
  double delta = 0.05;    // required margin of M->M and M->V over M->I
};

struct OrderingResult {
  std::array<std::array<double, 3>, 3> mean_corr{};  // [train][test] mean envelope correlation
  double mm_minus_mv = 0.0;
  double mm_minus_mi = 0.0;
  double mv_minus_mi = 0.0;
  bool holds = false;  // |mm - mv| < epsilon and both exceed mi by > delta
  GridReport report;
};

// Generates a hierarchy, runs the linear cross-condition grid on it and checks
// M->M ~ M->V > M->I.
OrderingResult transfer_ordering_experiment(const SourceConfig& config, std::uint64_t seed,
                                            const OrderingOptions& options = {});

}  // namespace xcond
