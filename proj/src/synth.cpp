#include "xcond/synth.hpp"

#include "xcond/error.hpp"
#include "xcond/lag.hpp"
#include "xcond/rng.hpp"
#include "xcond/split.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace xcond {

Eigen::MatrixXd TrialSources::condition(Condition c) const {
  switch (c) {
    case Condition::Vocalized:
      return vocalized();
    case Condition::Mimed:
      return mimed();
    case Condition::Imagined:
      return imagined();
  }
  return imagined();
}

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  }
  return m;
}

// White noise low-passed by a truncated Gaussian kernel, rows rescaled to unit RMS.
Eigen::MatrixXd smooth_latent(Eigen::Index dims, Eigen::Index samples, double sigma, Rng& rng) {
  const Eigen::MatrixXd white = gaussian(dims, samples, rng);
  if (dims == 0) return white;
  Eigen::MatrixXd out = white;
  if (sigma > 0.0) {
    const int half = static_cast<int>(std::ceil(4.0 * sigma));
    Eigen::VectorXd kernel(2 * half + 1);
    for (int i = -half; i <= half; ++i) kernel[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel /= kernel.sum();
    out.setZero();
    for (Eigen::Index t = 0; t < samples; ++t) {
      for (int i = -half; i <= half; ++i) {
        const Eigen::Index s = t + i;
        if (s >= 0 && s < samples) out.col(t) += kernel[i + half] * white.col(s);
      }
    }
  }
  for (Eigen::Index d = 0; d < dims; ++d) {
    const double rms = std::sqrt(out.row(d).squaredNorm() / static_cast<double>(samples));
    if (rms > 0.0) out.row(d) /= rms;
  }
  return out;
}

void validate(const SourceConfig& c, int n_sentences, Eigen::Index samples, Eigen::Index channels) {
  if (n_sentences < 1 || samples < 1 || channels < 1) throw ConfigError("synth: sizes must be positive");
  if (c.planning_dims < 0 || c.articulatory_dims < 0 || c.sensory_dims < 0) {
    throw ConfigError("synth: latent dimensionalities must be >= 0");
  }
  if (c.planning_dims + c.articulatory_dims + c.sensory_dims > channels) {
    throw ConfigError("synth: d_P + d_A + d_S exceeds the channel count");
  }
  if (c.planning_amplitude < 0.0 || c.articulatory_amplitude < 0.0 || c.sensory_amplitude < 0.0) {
    throw ConfigError("synth: amplitudes must be >= 0");
  }
  if (c.neural_noise < 0.0 || c.stimulus_noise < 0.0 || c.smoothing_sigma < 0.0) {
    throw ConfigError("synth: noise levels and smoothing must be >= 0");
  }
  if (c.articulatory_angle_deg < 0.0 || c.articulatory_angle_deg > 90.0 || c.sensory_angle_deg < 0.0 ||
      c.sensory_angle_deg > 90.0) {
    throw ConfigError("synth: overlap angles must lie in [0, 90] degrees");
  }
  if (c.articulatory_angle_deg < 90.0 && c.articulatory_dims > c.planning_dims) {
    throw ConfigError("synth: a non-orthogonal articulatory subspace needs d_A <= d_P");
  }
  if (c.sensory_angle_deg < 90.0 && c.sensory_dims > c.articulatory_dims) {
    throw ConfigError("synth: a non-orthogonal sensory subspace needs d_S <= d_A");
  }
  if (c.n_freqs < 1 || c.stimulus_delay < 0) throw ConfigError("synth: n_freqs >= 1 and stimulus_delay >= 0 required");
  if (!(c.sample_rate_hz > 0.0)) throw ConfigError("synth: sample rate must be positive");
}

}  // namespace

SynthResult generate(const SourceConfig& config, int n_sentences, Eigen::Index samples, Eigen::Index channels,
                     std::uint64_t seed) {
  validate(config, n_sentences, samples, channels);
  const int dp = config.planning_dims, da = config.articulatory_dims, ds = config.sensory_dims;
  HierarchicalSources src;
  src.config = config;

  Rng structure_rng(derive_seed(seed, 0));
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(channels, channels, structure_rng))
                                .householderQ() *
                            Eigen::MatrixXd::Identity(channels, channels);
  const Eigen::MatrixXd qp = q.leftCols(dp);
  const Eigen::MatrixXd qa = q.middleCols(dp, da);
  const Eigen::MatrixXd qs = q.middleCols(dp + da, ds);
  const double ta = config.articulatory_angle_deg * std::numbers::pi / 180.0;
  const double ts = config.sensory_angle_deg * std::numbers::pi / 180.0;
  src.planning_loading = qp;
  src.articulatory_loading = std::sin(ta) * qa;
  if (config.articulatory_angle_deg < 90.0) src.articulatory_loading += std::cos(ta) * qp.leftCols(da);
  src.sensory_loading = std::sin(ts) * qs;
  if (config.sensory_angle_deg < 90.0) src.sensory_loading += std::cos(ts) * qa.leftCols(ds);
  src.planning_map = gaussian(config.n_freqs, dp, structure_rng) / std::sqrt(std::max(1, dp));
  src.articulatory_map = gaussian(config.n_freqs, da, structure_rng) / std::sqrt(std::max(1, da));
  src.sensory_map = gaussian(config.n_freqs, ds, structure_rng) / std::sqrt(std::max(1, ds));

  std::vector<double> centers;
  for (int i = 0; i < config.n_freqs; ++i) centers.push_back(250.0 * (i + 1));

  std::vector<TrialPair> pairs;
  const Eigen::Index delay = config.stimulus_delay;
  for (int s = 0; s < n_sentences; ++s) {
    Rng rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(s)));
    // Latents run `delay` samples ahead of the trial window so every target frame has a cause.
    const Eigen::MatrixXd zp = smooth_latent(dp, samples + delay, config.smoothing_sigma, rng);
    const Eigen::MatrixXd za = smooth_latent(da, samples + delay, config.smoothing_sigma, rng);
    const Eigen::MatrixXd zs = smooth_latent(ds, samples + delay, config.smoothing_sigma, rng);
    const Eigen::MatrixXd xp = config.planning_amplitude * src.planning_loading * zp.rightCols(samples);
    const Eigen::MatrixXd xa = config.articulatory_amplitude * src.articulatory_loading * za.rightCols(samples);
    const Eigen::MatrixXd xs = config.sensory_amplitude * src.sensory_loading * zs.rightCols(samples);

    StimulusSpectrogram target;
    target.data = config.planning_stimulus_weight * config.planning_amplitude * src.planning_map * zp.leftCols(samples) +
                  config.articulatory_stimulus_weight * config.articulatory_amplitude * src.articulatory_map *
                      za.leftCols(samples);
    if (config.sensory_drives_stimulus) {
      target.data += config.sensory_stimulus_weight * config.sensory_amplitude * src.sensory_map * zs.leftCols(samples);
    }
    target.data += config.stimulus_noise * gaussian(config.n_freqs, samples, rng);
    target.freq_centers_hz = centers;
    target.sample_rate_hz = config.sample_rate_hz;

    for (int rep = 0; rep < 2; ++rep) {
      TrialSources ts_rec;
      ts_rec.sentence_id = s;
      ts_rec.repetition = rep;
      ts_rec.planning = xp;
      ts_rec.articulatory = xa;
      ts_rec.sensory = xs;
      ts_rec.noise = config.neural_noise * gaussian(channels, samples, rng);
      for (Condition c : kConditions) {
        TrialPair p;
        p.trial.data = ts_rec.condition(c);
        p.trial.sample_rate_hz = config.sample_rate_hz;
        p.trial.sentence_id = s;
        p.trial.repetition = rep;
        p.trial.condition = c;
        p.target = target;
        pairs.push_back(std::move(p));
      }
      src.trials.push_back(std::move(ts_rec));
    }
  }
  return {Dataset(std::move(pairs)), std::move(src)};
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& m, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  const double top = sv.size() ? sv[0] : 0.0;
  while (rank < sv.size() && sv[rank] > rel_tol * top) ++rank;
  return svd.matrixU().leftCols(rank);
}

ProjectionSplit project_onto_subspace(const Eigen::MatrixXd& component, const Eigen::MatrixXd& basis) {
  if (basis.rows() != component.rows()) throw DataError("projection: basis and component row counts differ");
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  if ((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-8) {
    throw DataError("projection: basis columns are not orthonormal");
  }
  ProjectionSplit out;
  out.basis = basis;
  out.parallel = basis * (basis.transpose() * component);
  out.perpendicular = component - out.parallel;
  return out;
}

TransferIdentityReport verify_transfer_identities(const LinearDecoder& decoder, const HierarchicalSources& sources,
                                                  double tolerance) {
  TransferIdentityReport rep;
  const bool imagined = decoder.trained_on == Condition::Imagined;
  Eigen::MatrixXd planning_basis;
  if (imagined && sources.planning_loading.cols() > 0) planning_basis = orthonormal_basis(sources.planning_loading);
  double worst_ratio = 0.0, worst_par = 0.0;
  for (const auto& t : sources.trials) {
    if (t.planning.rows() != decoder.channels()) throw DataError("identity check: decoder/source channel mismatch");
    const Eigen::MatrixXd sv = predict(decoder, t.vocalized());
    const Eigen::MatrixXd sm = predict(decoder, t.mimed());
    const Eigen::MatrixXd si = predict(decoder, t.imagined());
    const Eigen::MatrixXd gs = decoder.G.transpose() * build_lag_matrix(t.sensory, decoder.lagspec);
    const Eigen::MatrixXd ga = decoder.G.transpose() * build_lag_matrix(t.articulatory, decoder.lagspec);
    rep.max_dev_vocalized_minus_mimed =
        std::max(rep.max_dev_vocalized_minus_mimed, (sv - sm - gs).cwiseAbs().maxCoeff());
    rep.max_dev_mimed_minus_imagined =
        std::max(rep.max_dev_mimed_minus_imagined, (sm - si - ga).cwiseAbs().maxCoeff());
    if (imagined) {
      Eigen::MatrixXd par = Eigen::MatrixXd::Zero(t.articulatory.rows(), t.articulatory.cols());
      if (planning_basis.cols() > 0) par = project_onto_subspace(t.articulatory, planning_basis).parallel;
      const Eigen::MatrixXd gpar = decoder.G.transpose() * build_lag_matrix(par, decoder.lagspec);
      const Eigen::MatrixXd gperp = decoder.G.transpose() * build_lag_matrix(t.articulatory - par, decoder.lagspec);
      const Eigen::MatrixXd gp = decoder.G.transpose() * build_lag_matrix(t.planning, decoder.lagspec);
      worst_par = std::max(worst_par, (ga - gpar).cwiseAbs().maxCoeff());
      const double denom = gp.norm();
      worst_ratio = std::max(worst_ratio, denom > 0.0 ? gperp.norm() / denom : (gperp.norm() > 0.0 ? INFINITY : 0.0));
    }
  }
  if (imagined) {
    rep.max_dev_parallel = worst_par;
    rep.perpendicular_ratio = worst_ratio;
  }
  rep.passed = rep.max_dev_vocalized_minus_mimed < tolerance && rep.max_dev_mimed_minus_imagined < tolerance;
  return rep;
}

OrderingResult transfer_ordering_experiment(const SourceConfig& config, std::uint64_t seed,
                                            const OrderingOptions& options) {
  const SynthResult synth = generate(config, options.n_sentences, options.samples, options.channels, seed);
  const SplitPlan split = make_split(synth.dataset, SplitFractions{}, derive_seed(seed, 77));
  const LinearFamily family(LagSpec::from_window(config.sample_rate_hz, options.lag_window_ms), default_alpha_grid());
  OrderingResult out;
  out.report = evaluate_grid(synth.dataset, split, family, seed);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) out.mean_corr[i][j] = out.report.cells[i][j].mean_env_corr;
  }
  const auto& m = out.mean_corr[index_of(Condition::Mimed)];
  const double mm = m[index_of(Condition::Mimed)];
  const double mv = m[index_of(Condition::Vocalized)];
  const double mi = m[index_of(Condition::Imagined)];
  out.mm_minus_mv = mm - mv;
  out.mm_minus_mi = mm - mi;
  out.mv_minus_mi = mv - mi;
  out.holds = std::abs(out.mm_minus_mv) < options.epsilon && out.mm_minus_mi > options.delta &&
              out.mv_minus_mi > options.delta;
  return out;
}

}  // namespace xcond
