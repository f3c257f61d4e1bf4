// xcond: cross-condition stimulus reconstruction pipeline.
#include "xcond/error.hpp"
#include "xcond/lag.hpp"
#include "xcond/manifest.hpp"
#include "xcond/matrix_io.hpp"
#include "xcond/melspec.hpp"
#include "xcond/pipeline.hpp"
#include "xcond/ridge.hpp"
#include "xcond/rng.hpp"
#include "xcond/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace xcond;

namespace {

void progress(const std::string& msg) { std::cerr << "[xcond] " << msg << std::endl; }

struct RunFlags {
  std::string config_file;
  std::string manifest;
  double lag_window_ms = 0;
  std::vector<double> alpha_grid;
  std::vector<double> split;
  std::uint64_t split_seed = 0;
  std::uint64_t seed = 0;
  std::string null_kind, nn_null_kind;
  int null_realizations = 0;
  long n_permutations = 0;
  bool no_nulls = false;
  std::string decoders;
  long hidden = 0, kernel = 0;
  int epochs = 0, batch = 0;
  double lr = 0;
  std::string output;
};

struct RunOptions {
  CLI::Option *manifest, *lag, *alpha, *split, *split_seed, *seed, *null_kind, *nn_null_kind, *null_real, *nperm,
      *decoders, *hidden, *kernel, *epochs, *batch, *lr, *output;
};

RunOptions add_run_flags(CLI::App* app, RunFlags& f) {
  RunOptions o;
  app->add_option("-c,--config", f.config_file, "JSON run config; flags override its values");
  o.manifest = app->add_option("-m,--manifest", f.manifest, "dataset manifest (JSON)");
  o.lag = app->add_option("--lag-window-ms", f.lag_window_ms, "lag window in milliseconds");
  o.alpha = app->add_option("--alpha-grid", f.alpha_grid, "ridge alpha candidates");
  o.split = app->add_option("--split", f.split, "train val test fractions")->expected(3);
  o.split_seed = app->add_option("--split-seed", f.split_seed, "seed for the sentence folds");
  o.seed = app->add_option("--seed", f.seed, "run seed");
  o.null_kind = app->add_option("--null-kind", f.null_kind, "linear null: shuffled | circular");
  o.nn_null_kind = app->add_option("--nn-null-kind", f.nn_null_kind, "nonlinear null: shuffled | circular");
  o.null_real = app->add_option("--null-realizations", f.null_realizations, "null decoders per condition");
  o.nperm = app->add_option("--n-permutations", f.n_permutations, "permutation test resamples");
  app->add_flag("--no-nulls", f.no_nulls, "skip null decoders");
  o.decoders = app->add_option("--decoders", f.decoders, "linear | nonlinear | both");
  o.hidden = app->add_option("--hidden", f.hidden, "network hidden units");
  o.kernel = app->add_option("--kernel", f.kernel, "network convolution width");
  o.epochs = app->add_option("--epochs", f.epochs, "network training epochs");
  o.batch = app->add_option("--batch-trials", f.batch, "trials per mini-batch");
  o.lr = app->add_option("--lr", f.lr, "Adam learning rate");
  o.output = app->add_option("-o,--output", f.output, "output directory");
  return o;
}

RunConfig resolve(const RunFlags& f, const RunOptions& o) {
  RunConfig c = f.config_file.empty() ? RunConfig{} : load_run_config(f.config_file);
  if (o.manifest->count()) c.manifest = f.manifest;
  if (o.lag->count()) c.lag_window_ms = f.lag_window_ms;
  if (o.alpha->count()) c.alpha_grid = f.alpha_grid;
  if (o.split->count()) c.split = {f.split[0], f.split[1], f.split[2]};
  if (o.split_seed->count()) c.split_seed = f.split_seed;
  if (o.seed->count()) c.seed = f.seed;
  if (o.null_kind->count()) c.null_spec.kind = parse_null_kind(f.null_kind);
  if (o.nn_null_kind->count()) c.nn_null_spec.kind = parse_null_kind(f.nn_null_kind);
  if (o.null_real->count()) c.null_spec.n_realizations = c.nn_null_spec.n_realizations = f.null_realizations;
  if (o.nperm->count()) c.n_permutations = f.n_permutations;
  if (f.no_nulls) c.run_nulls = false;
  if (o.decoders->count()) c.decoders = parse_decoder_set(f.decoders);
  if (o.hidden->count()) c.nn.hidden = f.hidden;
  if (o.kernel->count()) c.nn.kernel = f.kernel;
  if (o.epochs->count()) c.nn.train.epochs = f.epochs;
  if (o.batch->count()) c.nn.train.batch_trials = f.batch;
  if (o.lr->count()) c.nn.train.learning_rate = f.lr;
  if (o.output->count()) c.output_dir = f.output;
  // Round-trip through JSON so flag values get the same validation as file values.
  return run_config_from_json(to_json(c));
}

int cmd_run(const RunFlags& f, const RunOptions& o) {
  const RunConfig config = resolve(f, o);
  const RunResult result = run_all(config, progress);
  emit_reports(result, config.output_dir);
  std::string line = "run: wrote " + config.output_dir;
  for (const auto& r : result.reports) {
    const auto& mm = r.cell(Condition::Mimed, Condition::Mimed);
    char buf[128];
    std::snprintf(buf, sizeof buf, " | %s M->M r=%.3f", r.family.c_str(), mm.mean_env_corr);
    line += buf;
  }
  std::cout << line << '\n';
  return 0;
}

struct SynthFlags {
  std::string output = "synth_data";
  std::string format = "f64";
  int sentences = 20;
  long samples = 200, channels = 16;
  std::uint64_t seed = 0;
  SourceConfig source;
};

void add_source_flags(CLI::App* app, SourceConfig& s) {
  app->add_option("--planning-dims", s.planning_dims);
  app->add_option("--articulatory-dims", s.articulatory_dims);
  app->add_option("--sensory-dims", s.sensory_dims);
  app->add_option("--planning-amplitude", s.planning_amplitude);
  app->add_option("--articulatory-amplitude", s.articulatory_amplitude);
  app->add_option("--sensory-amplitude", s.sensory_amplitude);
  app->add_option("--articulatory-angle", s.articulatory_angle_deg, "degrees between articulatory and planning subspaces");
  app->add_option("--sensory-angle", s.sensory_angle_deg, "degrees between sensory and articulatory subspaces");
  app->add_option("--smoothing", s.smoothing_sigma, "latent smoothing width in samples");
  app->add_option("--articulatory-weight", s.articulatory_stimulus_weight, "articulatory weight in the stimulus");
  app->add_flag("--sensory-drives-stimulus", s.sensory_drives_stimulus);
  app->add_option("--freqs", s.n_freqs);
  app->add_option("--delay", s.stimulus_delay, "stimulus delay in samples");
  app->add_option("--neural-noise", s.neural_noise);
  app->add_option("--stimulus-noise", s.stimulus_noise);
  app->add_option("--sample-rate", s.sample_rate_hz);
}

int cmd_synth(const SynthFlags& f) {
  if (f.format != "f64" && f.format != "csv") throw ConfigError("--format must be f64 or csv");
  const std::string ext = "." + f.format;
  progress("generating " + std::to_string(f.sentences) + " sentences");
  const SynthResult r = generate(f.source, f.sentences, f.samples, f.channels, f.seed);
  const fs::path manifest = write_dataset(r.dataset, f.output, ext);
  const fs::path truth = fs::path(f.output) / "sources";
  fs::create_directories(truth);
  write_matrix(truth / ("planning_loading" + ext), r.sources.planning_loading);
  write_matrix(truth / ("articulatory_loading" + ext), r.sources.articulatory_loading);
  write_matrix(truth / ("sensory_loading" + ext), r.sources.sensory_loading);
  write_matrix(truth / ("planning_map" + ext), r.sources.planning_map);
  write_matrix(truth / ("articulatory_map" + ext), r.sources.articulatory_map);
  write_matrix(truth / ("sensory_map" + ext), r.sources.sensory_map);
  for (const auto& t : r.sources.trials) {
    const std::string stem = "s" + std::to_string(t.sentence_id) + "_r" + std::to_string(t.repetition);
    write_matrix(truth / (stem + "_planning" + ext), t.planning);
    write_matrix(truth / (stem + "_articulatory" + ext), t.articulatory);
    write_matrix(truth / (stem + "_sensory" + ext), t.sensory);
    write_matrix(truth / (stem + "_noise" + ext), t.noise);
  }
  std::cout << "synth: wrote " << r.dataset.size() << " trials to " << manifest.string() << '\n';
  return 0;
}

struct VerifyFlags {
  int seeds = 10;
  std::uint64_t seed = 0;
  int sentences = 10;
  long samples = 200, channels = 16;
  double lag_window_ms = 50;
  double tolerance = 1e-10;
  bool ordering = false;
  SourceConfig source;
};

int cmd_verify(const VerifyFlags& f) {
  bool ok = true;
  double worst = 0.0;
  for (int s = 0; s < f.seeds; ++s) {
    const std::uint64_t seed = derive_seed(f.seed, static_cast<std::uint64_t>(s));
    const SynthResult r = generate(f.source, f.sentences, f.samples, f.channels, seed);
    const LagSpec lags = LagSpec::from_window(f.source.sample_rate_hz, f.lag_window_ms);
    for (Condition c : {Condition::Mimed, Condition::Imagined}) {
      const LinearDecoder d = fit_linear_decoder(r.dataset.select(c), lags, 1.0, c);
      const auto rep = verify_transfer_identities(d, r.sources, f.tolerance);
      worst = std::max({worst, rep.max_dev_vocalized_minus_mimed, rep.max_dev_mimed_minus_imagined});
      ok = ok && rep.passed;
      std::fprintf(stderr, "[xcond] seed %d %s-trained: (a) %.3g (b) %.3g", s, std::string(to_string(c)).c_str(),
                   rep.max_dev_vocalized_minus_mimed, rep.max_dev_mimed_minus_imagined);
      if (rep.max_dev_parallel) std::fprintf(stderr, " (c) %.3g", *rep.max_dev_parallel);
      std::fprintf(stderr, "\n");
    }
  }
  std::string line = std::string("verify: identities ") + (ok ? "hold" : "FAIL");
  char buf[64];
  std::snprintf(buf, sizeof buf, " (max deviation %.3g)", worst);
  line += buf;
  if (f.ordering) {
    int holds = 0;
    for (int s = 0; s < f.seeds; ++s) {
      const auto o = transfer_ordering_experiment(f.source, derive_seed(f.seed, 100 + static_cast<std::uint64_t>(s)));
      std::fprintf(stderr, "[xcond] ordering seed %d: MM-MV %.3f MM-MI %.3f MV-MI %.3f %s\n", s, o.mm_minus_mv,
                   o.mm_minus_mi, o.mv_minus_mi, o.holds ? "holds" : "violated");
      holds += o.holds ? 1 : 0;
    }
    line += "; ordering M->M ~ M->V > M->I in " + std::to_string(holds) + "/" + std::to_string(f.seeds) + " seeds";
  }
  std::cout << line << '\n';
  return ok ? 0 : 4;
}

int cmd_stats(const std::string& dir, long n_permutations, std::optional<std::uint64_t> seed) {
  std::uint64_t s = 0;
  long nperm = n_permutations;
  const fs::path cfg = fs::path(dir) / "config.json";
  if (fs::exists(cfg)) {
    const RunConfig c = load_run_config(cfg);
    s = c.seed;
    if (nperm <= 0) nperm = c.n_permutations;
  }
  if (seed) s = *seed;
  if (nperm <= 0) nperm = 10000;
  const auto rows = recompute_stats(dir, nperm, s);
  std::cout << "stats: wrote " << rows.size() << " rows to " << (fs::path(dir) / "stats.csv").string() << '\n';
  return 0;
}

int cmd_melspec(const std::string& input, const std::string& output, double sr, const MelConfig& mc) {
  const Eigen::MatrixXd w = read_matrix(input);
  if (w.rows() != 1 && w.cols() != 1) throw DataError(input + ": waveform must be a single row or column");
  const Eigen::VectorXd v = w.reshaped();
  const StimulusSpectrogram s = compute_log_mel(v, sr, mc);
  write_matrix(output, s.data);
  std::cout << "melspec: " << s.freqs() << " x " << s.samples() << " at " << s.sample_rate_hz << " Hz -> " << output
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-condition stimulus reconstruction from neural recordings"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "fit and evaluate the 3x3 train/test condition grid");
  const RunOptions run_opts = add_run_flags(run, run_flags);

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "generate a synthetic hierarchical dataset");
  synth->add_option("-o,--output", synth_flags.output, "output directory");
  synth->add_option("--format", synth_flags.format, "f64 | csv");
  synth->add_option("--sentences", synth_flags.sentences);
  synth->add_option("--samples", synth_flags.samples);
  synth->add_option("--channels", synth_flags.channels);
  synth->add_option("--seed", synth_flags.seed);
  add_source_flags(synth, synth_flags.source);

  VerifyFlags verify_flags;
  auto* verify = app.add_subcommand("verify", "check the transfer identities on synthetic data");
  verify->add_option("--seeds", verify_flags.seeds, "number of random seeds");
  verify->add_option("--seed", verify_flags.seed, "base seed");
  verify->add_option("--sentences", verify_flags.sentences);
  verify->add_option("--samples", verify_flags.samples);
  verify->add_option("--channels", verify_flags.channels);
  verify->add_option("--lag-window-ms", verify_flags.lag_window_ms);
  verify->add_option("--tolerance", verify_flags.tolerance);
  verify->add_flag("--ordering", verify_flags.ordering, "also run the transfer ordering experiment");
  add_source_flags(verify, verify_flags.source);

  std::string stats_dir;
  long stats_nperm = 0;
  std::uint64_t stats_seed = 0;
  auto* stats = app.add_subcommand("stats", "recompute statistics from a finished run directory");
  stats->add_option("dir", stats_dir, "run output directory")->required();
  stats->add_option("--n-permutations", stats_nperm);
  auto* stats_seed_opt = stats->add_option("--seed", stats_seed);

  std::string mel_in, mel_out;
  double mel_sr = 0;
  MelConfig mel;
  auto* melspec = app.add_subcommand("melspec", "log-mel spectrogram of a waveform matrix file");
  melspec->add_option("input", mel_in, "waveform (1 x N matrix file)")->required();
  melspec->add_option("-o,--output", mel_out, "output matrix file")->required();
  melspec->add_option("--sample-rate", mel_sr, "waveform sample rate in Hz")->required();
  melspec->add_option("--window", mel.window);
  melspec->add_option("--hop", mel.hop);
  melspec->add_option("--n-mels", mel.n_mels);
  melspec->add_option("--n-fft", mel.n_fft);
  melspec->add_option("--fmin", mel.fmin_hz);
  melspec->add_option("--fmax", mel.fmax_hz);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_flags, run_opts);
    if (*synth) return cmd_synth(synth_flags);
    if (*verify) return cmd_verify(verify_flags);
    if (*stats) {
      std::optional<std::uint64_t> seed;
      if (stats_seed_opt->count()) seed = stats_seed;
      return cmd_stats(stats_dir, stats_nperm, seed);
    }
    if (*melspec) return cmd_melspec(mel_in, mel_out, mel_sr, mel);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
