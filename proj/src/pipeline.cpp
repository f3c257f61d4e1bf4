#include "xcond/pipeline.hpp"

#include "xcond/error.hpp"
#include "xcond/lag.hpp"
#include "xcond/manifest.hpp"
#include "xcond/metrics.hpp"
#include "xcond/rng.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace xcond {

using nlohmann::json;

std::string_view to_string(DecoderSet d) {
  switch (d) {
    case DecoderSet::Linear:
      return "linear";
    case DecoderSet::Nonlinear:
      return "nonlinear";
    case DecoderSet::Both:
      return "both";
  }
  return "linear";
}

DecoderSet parse_decoder_set(std::string_view s) {
  if (s == "linear") return DecoderSet::Linear;
  if (s == "nonlinear") return DecoderSet::Nonlinear;
  if (s == "both") return DecoderSet::Both;
  throw ConfigError("decoders must be linear, nonlinear or both (got '" + std::string(s) + "')");
}

namespace {

json null_json(const NullSpec& s) {
  return {{"kind", std::string(to_string(s.kind))}, {"n_realizations", s.n_realizations}, {"seed", s.seed}};
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field " + where + "." + key + ": " + e.what());
  }
}

NullSpec null_from_json(const json& j, NullSpec base, const std::string& where) {
  check_keys(j, where, {"kind", "n_realizations", "seed"});
  if (j.contains("kind")) {
    std::string kind;
    read(j, "kind", kind, where);
    try {
      base.kind = parse_null_kind(kind);
    } catch (const Error& e) {
      throw ConfigError(where + ".kind: " + e.what());
    }
  }
  read(j, "n_realizations", base.n_realizations, where);
  read(j, "seed", base.seed, where);
  return base;
}

void validate(const RunConfig& c) {
  if (!(c.lag_window_ms >= 0.0)) throw ConfigError("lag_window_ms must be >= 0");
  validate_fractions(c.split);
  if (c.alpha_grid.empty()) throw ConfigError("alpha_grid must not be empty");
  for (double a : c.alpha_grid) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("alpha_grid values must be finite and >= 0");
  }
  if (c.run_nulls && (c.null_spec.n_realizations < 1 || c.nn_null_spec.n_realizations < 1)) {
    throw ConfigError("null n_realizations must be >= 1");
  }
  if (c.n_permutations < 1) throw ConfigError("n_permutations must be >= 1");
  if (c.nn.hidden < 1 || c.nn.kernel < 1) throw ConfigError("nonlinear hidden and kernel must be >= 1");
  if (c.nn.train.epochs < 1 || c.nn.train.batch_trials < 1 || !(c.nn.train.learning_rate >= 0.0)) {
    throw ConfigError("nonlinear epochs >= 1, batch_trials >= 1 and learning_rate >= 0 required");
  }
}

}  // namespace

json to_json(const RunConfig& c) {
  return {
      {"manifest", c.manifest},
      {"lag_window_ms", c.lag_window_ms},
      {"alpha_grid", c.alpha_grid},
      {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}, {"seed", c.split_seed}}},
      {"seed", c.seed},
      {"nulls",
       {{"enabled", c.run_nulls},
        {"n_permutations", c.n_permutations},
        {"linear", null_json(c.null_spec)},
        {"nonlinear", null_json(c.nn_null_spec)}}},
      {"decoders", std::string(to_string(c.decoders))},
      {"nonlinear",
       {{"hidden", c.nn.hidden},
        {"kernel", c.nn.kernel},
        {"learning_rate", c.nn.train.learning_rate},
        {"epochs", c.nn.train.epochs},
        {"batch_trials", c.nn.train.batch_trials}}},
      {"output_dir", c.output_dir},
  };
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  check_keys(j, "config",
             {"manifest", "lag_window_ms", "alpha_grid", "split", "seed", "nulls", "decoders", "nonlinear",
              "output_dir"});
  read(j, "manifest", c.manifest, "config");
  read(j, "lag_window_ms", c.lag_window_ms, "config");
  read(j, "alpha_grid", c.alpha_grid, "config");
  read(j, "seed", c.seed, "config");
  read(j, "output_dir", c.output_dir, "config");
  if (j.contains("split")) {
    const json& s = j["split"];
    check_keys(s, "split", {"train", "val", "test", "seed"});
    read(s, "train", c.split.train, "split");
    read(s, "val", c.split.val, "split");
    read(s, "test", c.split.test, "split");
    read(s, "seed", c.split_seed, "split");
  }
  if (j.contains("nulls")) {
    const json& n = j["nulls"];
    check_keys(n, "nulls", {"enabled", "n_permutations", "linear", "nonlinear"});
    read(n, "enabled", c.run_nulls, "nulls");
    read(n, "n_permutations", c.n_permutations, "nulls");
    if (n.contains("linear")) c.null_spec = null_from_json(n["linear"], c.null_spec, "nulls.linear");
    if (n.contains("nonlinear")) c.nn_null_spec = null_from_json(n["nonlinear"], c.nn_null_spec, "nulls.nonlinear");
  }
  if (j.contains("decoders")) {
    std::string d;
    read(j, "decoders", d, "config");
    c.decoders = parse_decoder_set(d);
  }
  if (j.contains("nonlinear")) {
    const json& n = j["nonlinear"];
    check_keys(n, "nonlinear", {"hidden", "kernel", "learning_rate", "epochs", "batch_trials"});
    read(n, "hidden", c.nn.hidden, "nonlinear");
    read(n, "kernel", c.nn.kernel, "nonlinear");
    read(n, "learning_rate", c.nn.train.learning_rate, "nonlinear");
    read(n, "epochs", c.nn.train.epochs, "nonlinear");
    read(n, "batch_trials", c.nn.train.batch_trials, "nonlinear");
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  if (!c.manifest.empty() && std::filesystem::path(c.manifest).is_relative()) {
    c.manifest = (path.parent_path() / c.manifest).lexically_normal().string();
  }
  return c;
}

PreparedRun prepare_run(const RunConfig& config) {
  if (config.manifest.empty()) throw ConfigError("no dataset manifest given");
  return prepare_run(config, load_dataset(config.manifest));
}

PreparedRun prepare_run(const RunConfig& config, Dataset dataset) {
  validate(config);
  const auto present = dataset.conditions();
  std::string missing;
  for (Condition c : kConditions) {
    if (!present.count(c)) missing += (missing.empty() ? "" : ", ") + std::string(to_string(c));
  }
  if (!missing.empty()) throw DataError("dataset is missing conditions: " + missing);
  PreparedRun run{config, std::move(dataset), {}};
  run.split = make_split(run.dataset, config.split, config.split_seed);
  if (run.split.test_ids.size() < 2) {
    throw ConfigError("test fold needs at least two sentences for rank analysis");
  }
  return run;
}

std::unique_ptr<Family> make_family(const RunConfig& config, const std::string& name, double sample_rate_hz) {
  if (name == "linear") {
    return std::make_unique<LinearFamily>(LagSpec::from_window(sample_rate_hz, config.lag_window_ms),
                                          config.alpha_grid);
  }
  if (name == "nonlinear") return std::make_unique<NonlinearFamily>(config.nn);
  throw ConfigError("unknown decoder family '" + name + "'");
}

GridReport run_grid(const PreparedRun& run, const Family& family) {
  return evaluate_grid(run.dataset, run.split, family, run.config.seed);
}

void run_nulls(const PreparedRun& run, const Family& family, GridReport& report) {
  const NullSpec& spec = family.name() == "nonlinear" ? run.config.nn_null_spec : run.config.null_spec;
  attach_nulls(run.dataset, family, spec, run.config.n_permutations, report);
}

namespace {

std::optional<double> corr(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  const Eigen::Map<const Eigen::VectorXd> x(a.data(), 9), y(b.data(), 9);
  return try_pearson(x, y);
}

}  // namespace

ModelComparison run_model_comparison(const GridReport& a, const GridReport& b) {
  ModelComparison out;
  std::string problems;
  auto note = [&](const std::string& s) { problems += (problems.empty() ? "" : "; ") + s; };
  for (const GridReport* r : {&a, &b}) {
    ModelLine line;
    line.family = r->family;
    bool finite = true;
    for (std::size_t i = 0; i < 9; ++i) {
      const CellResult& cell = r->cells[i / 3][i % 3];
      line.mean_env_corr[i] = cell.mean_env_corr;
      line.auc_norm[i] = cell.curve ? cell.curve->auc_norm : std::nan("");
      finite = finite && std::isfinite(line.mean_env_corr[i]) && std::isfinite(line.auc_norm[i]);
    }
    if (!finite) {
      note(line.family + ": undefined cell correlation or AUC");
    } else {
      try {
        line.fit = linear_fit(line.mean_env_corr, line.auc_norm);
        if (!line.fit->r) note(line.family + ": constant AUC, correlation undefined");
      } catch (const NumericError&) {
        note(line.family + ": constant mean correlation, fit undefined");
      }
    }
    out.lines.push_back(std::move(line));
  }
  const ModelLine& la = out.lines[0];
  const ModelLine& lb = out.lines[1];
  if (la.fit && lb.fit) out.slope_difference = la.fit->slope - lb.fit->slope;
  if (problems.empty()) {
    std::array<double, 9> shared{};
    for (std::size_t i = 0; i < 9; ++i) shared[i] = 0.5 * (la.auc_norm[i] + lb.auc_norm[i]);
    const auto r1 = corr(shared, la.mean_env_corr);
    const auto r2 = corr(shared, lb.mean_env_corr);
    const auto r12 = corr(la.mean_env_corr, lb.mean_env_corr);
    if (r1 && r2 && r12) {
      try {
        out.steiger = steiger_test(*r1, *r2, *r12, 9);
      } catch (const NumericError& e) {
        note(std::string("shared-variable test: ") + e.what());
      }
    } else {
      note("shared-variable test: undefined correlation");
    }
    const auto jk = corr(la.mean_env_corr, la.auc_norm), hm = corr(lb.mean_env_corr, lb.auc_norm);
    const auto jh = corr(la.mean_env_corr, lb.mean_env_corr), jm = corr(la.mean_env_corr, lb.auc_norm);
    const auto kh = corr(la.auc_norm, lb.mean_env_corr), km = corr(la.auc_norm, lb.auc_norm);
    if (jk && hm && jh && jm && kh && km) {
      try {
        out.steiger_nonoverlapping = steiger_test_nonoverlapping(*jk, *hm, *jh, *jm, *kh, *km, 9);
      } catch (const NumericError&) {
        // Perfectly collinear cross terms; the shared-variable result stands alone.
      }
    }
  }
  out.computable = problems.empty() && out.steiger.has_value();
  out.note = problems;
  return out;
}

RunResult run_all(const RunConfig& config, const ProgressFn& progress) {
  if (config.manifest.empty()) throw ConfigError("no dataset manifest given");
  if (progress) progress("loading " + config.manifest);
  return run_all(config, load_dataset(config.manifest), progress);
}

RunResult run_all(const RunConfig& config, Dataset dataset, const ProgressFn& progress) {
  const PreparedRun run = prepare_run(config, std::move(dataset));
  RunResult result;
  result.config = config;
  result.split = run.split;
  std::vector<std::string> families;
  if (config.decoders != DecoderSet::Nonlinear) families.push_back("linear");
  if (config.decoders != DecoderSet::Linear) families.push_back("nonlinear");
  for (const auto& name : families) {
    const auto family = make_family(config, name, run.dataset.sample_rate_hz());
    if (progress) progress("fitting " + name + " decoders (3x3 grid)");
    GridReport report = run_grid(run, *family);
    if (config.run_nulls) {
      if (progress) progress("fitting " + name + " null decoders");
      run_nulls(run, *family, report);
    }
    result.reports.push_back(std::move(report));
  }
  if (result.reports.size() == 2) result.comparison = run_model_comparison(result.reports[0], result.reports[1]);
  return result;
}

}  // namespace xcond
