#pragma once

#include "xcond/grid.hpp"
#include "xcond/nulls.hpp"
#include "xcond/split.hpp"
#include "xcond/stats.hpp"
#include "xcond/types.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace xcond {

enum class DecoderSet { Linear, Nonlinear, Both };

std::string_view to_string(DecoderSet d);
DecoderSet parse_decoder_set(std::string_view s);

struct RunConfig {
  std::string manifest;
  double lag_window_ms = 200.0;
  std::vector<double> alpha_grid = default_alpha_grid();
  SplitFractions split;
  std::uint64_t split_seed = 0;
  std::uint64_t seed = 0;
  bool run_nulls = true;
  NullSpec null_spec{NullKind::ShuffledPairing, 20, 1};      // linear decoders
  NullSpec nn_null_spec{NullKind::CircularShift, 20, 2};     // nonlinear decoders
  long n_permutations = 10000;
  DecoderSet decoders = DecoderSet::Linear;
  NonlinearSettings nn;
  std::string output_dir = "xcond_out";
};

nlohmann::json to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys or bad values throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

using ProgressFn = std::function<void(const std::string&)>;

struct PreparedRun {
  RunConfig config;
  Dataset dataset;
  SplitPlan split;
};

// Loads the manifest, requires all three conditions and draws the sentence folds.
PreparedRun prepare_run(const RunConfig& config);
PreparedRun prepare_run(const RunConfig& config, Dataset dataset);

std::unique_ptr<Family> make_family(const RunConfig& config, const std::string& name, double sample_rate_hz);

GridReport run_grid(const PreparedRun& run, const Family& family);
void run_nulls(const PreparedRun& run, const Family& family, GridReport& report);

struct ModelLine {
  std::string family;
  std::array<double, 9> mean_env_corr{};  // cells in [train][test] row-major order
  std::array<double, 9> auc_norm{};
  std::optional<LinearFit> fit;  // nullopt when x has no spread
};

struct ModelComparison {
  std::vector<ModelLine> lines;
  std::optional<double> slope_difference;  // first minus second
  std::optional<StatResult> steiger;        // shared-variable form
  std::optional<StatResult> steiger_nonoverlapping;
  bool computable = false;
  std::string note;  // reason when not computable
};

// Per family: OLS of auc_norm on mean envelope correlation over the 9 cells. The shared
// AUC variable of the Steiger test is the per-cell AUC averaged over both families.
// Degenerate inputs are reported in `note`, never thrown.
ModelComparison run_model_comparison(const GridReport& a, const GridReport& b);

struct RunResult {
  RunConfig config;
  SplitPlan split;
  std::vector<GridReport> reports;
  std::optional<ModelComparison> comparison;
};

RunResult run_all(const RunConfig& config, const ProgressFn& progress = {});
RunResult run_all(const RunConfig& config, Dataset dataset, const ProgressFn& progress = {});

// Output layout (CSV numbers written with 17 significant digits):
//   config.json, summary.json, folds.csv, stats.csv, model_comparison.csv, fit_lines.csv,
//   and per family: <f>_cells.csv, <f>_trials.csv, <f>_topk.csv, <f>_null_means.csv,
//   <f>_null_trials.csv, <f>_fits.csv.
std::vector<std::filesystem::path> emit_reports(const RunResult& result, const std::filesystem::path& dir);

// Per-cell statistics rows: comparison, statistic, p, d, n_permutations, seed.
struct StatRow {
  std::string comparison;
  double statistic = 0.0;
  double p = 1.0;
  std::optional<double> d;
  long n_permutations = 0;
  std::uint64_t seed = 0;
};

std::vector<StatRow> stat_rows(const RunResult& result);

// Rebuilds stats.csv from the per-trial tables in a finished output directory.
// Returns the rows written.
std::vector<StatRow> recompute_stats(const std::filesystem::path& dir, long n_permutations, std::uint64_t seed);

}  // namespace xcond
