#include "xcond/error.hpp"
#include "xcond/pipeline.hpp"
#include "xcond/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace xcond {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : ""; }

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& header) : path_(path), out_(path) {
    if (!out_) throw DataError("cannot write " + path.string());
    out_ << header << '\n';
  }
  template <class... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << fields, first = false), ...);
    out_ << '\n';
  }
  ~CsvFile() = default;
  void close() {
    out_.close();
    if (!out_) throw DataError("failed writing " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

std::string cond(std::size_t i) { return std::string(to_string(kConditions[i])); }

std::string cell_name(const std::string& family, std::size_t tr, std::size_t te) {
  return family + ":" + cond(tr) + "->" + cond(te);
}

double finite_mean(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (!std::isnan(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / n : std::nan("");
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json comparison_json(const ModelComparison& c) {
  json j{{"computable", c.computable}, {"note", c.note}};
  for (const auto& l : c.lines) {
    json line{{"family", l.family}};
    if (l.fit) {
      line["slope"] = l.fit->slope;
      line["intercept"] = l.fit->intercept;
      line["r"] = l.fit->r ? json(*l.fit->r) : json(nullptr);
    }
    j["lines"].push_back(line);
  }
  if (c.slope_difference) j["slope_difference"] = *c.slope_difference;
  if (c.steiger) j["steiger"] = {{"z", c.steiger->statistic}, {"p", c.steiger->p_value}};
  if (c.steiger_nonoverlapping) {
    j["steiger_nonoverlapping"] = {{"z", c.steiger_nonoverlapping->statistic},
                                   {"p", c.steiger_nonoverlapping->p_value}};
  }
  return j;
}

void write_stats(const fs::path& path, const std::vector<StatRow>& rows) {
  CsvFile f(path, "comparison,statistic,p,d,n_permutations,seed");
  for (const auto& r : rows) f.row(r.comparison, num(r.statistic), num(r.p), num(r.d), r.n_permutations, r.seed);
  f.close();
}

void append_comparison_rows(const ModelComparison& c, std::uint64_t seed, std::vector<StatRow>& rows) {
  if (c.steiger) rows.push_back({"model_comparison:steiger_shared_auc", c.steiger->statistic, c.steiger->p_value,
                                 std::nullopt, 0, seed});
  if (c.steiger_nonoverlapping) {
    rows.push_back({"model_comparison:steiger_nonoverlapping", c.steiger_nonoverlapping->statistic,
                    c.steiger_nonoverlapping->p_value, std::nullopt, 0, seed});
  }
}

void append_cell_rows(const GridReport& r, std::vector<StatRow>& rows) {
  if (!r.has_nulls) return;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      const CellResult& c = r.cells[i][k];
      if (c.stat) {
        rows.push_back({cell_name(r.family, i, k) + " vs null trials", c.stat->statistic, c.stat->p_value,
                        c.stat->effect_size_d, c.stat->n_permutations, r.seed});
      }
      rows.push_back({cell_name(r.family, i, k) + " vs null realization means",
                      c.mean_env_corr - finite_mean(c.null_realization_means), c.p_realization, std::nullopt,
                      static_cast<long>(c.null_realization_means.size()), r.null_spec.seed});
    }
  }
}

}  // namespace

std::vector<StatRow> stat_rows(const RunResult& result) {
  std::vector<StatRow> rows;
  for (const auto& r : result.reports) append_cell_rows(r, rows);
  if (result.comparison) append_comparison_rows(*result.comparison, result.config.seed, rows);
  return rows;
}

std::vector<fs::path> emit_reports(const RunResult& result, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  auto path = [&](const std::string& name) {
    written.push_back(dir / name);
    return dir / name;
  };

  write_json(path("config.json"), to_json(result.config));

  {
    CsvFile f(path("folds.csv"), "sentence_id,fold");
    std::map<int, std::string> folds;
    for (int id : result.split.train_ids) folds[id] = "train";
    for (int id : result.split.val_ids) folds[id] = "val";
    for (int id : result.split.test_ids) folds[id] = "test";
    for (const auto& [id, fold] : folds) f.row(id, fold);
    f.close();
  }

  json summary{{"seed", result.config.seed}, {"families", json::array()}};
  for (const GridReport& r : result.reports) {
    const std::string& fam = r.family;
    CsvFile cells(path(fam + "_cells.csv"),
                  "train,test,n,mean_env_corr,mean_spec_corr,auc_raw,auc_norm,undefined_comparisons,"
                  "null_mean_env_corr,p_perm,cohens_d,n_permutations,p_realization,underpowered,seed");
    CsvFile trials(path(fam + "_trials.csv"), "train,test,sentence_id,repetition,env_corr,spec_corr");
    CsvFile topk(path(fam + "_topk.csv"), "train,test,k,topk,chance");
    CsvFile null_means(path(fam + "_null_means.csv"), "train,test,realization,mean_env_corr");
    CsvFile null_trials(path(fam + "_null_trials.csv"), "train,test,index,env_corr");
    json fam_summary{{"family", fam}, {"cells", json::array()}};
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k < 3; ++k) {
        const CellResult& c = r.cells[i][k];
        if (c.n == 0) continue;
        const std::string tr = cond(i), te = cond(k);
        const double null_mean = r.has_nulls ? finite_mean(c.null_trial_corrs) : std::nan("");
        cells.row(tr, te, c.n, num(c.mean_env_corr), num(c.mean_spec_corr),
                  c.curve ? num(c.curve->auc_raw) : "", c.curve ? num(c.curve->auc_norm) : "",
                  c.undefined_comparisons, r.has_nulls ? num(null_mean) : "",
                  c.stat ? num(c.stat->p_value) : "", c.stat ? num(c.stat->effect_size_d) : "",
                  c.stat ? std::to_string(c.stat->n_permutations) : "", r.has_nulls ? num(c.p_realization) : "",
                  r.has_nulls ? (c.underpowered ? "1" : "0") : "", c.seed);
        for (const auto& t : c.trials) trials.row(tr, te, t.sentence_id, t.repetition, num(t.env_corr), num(t.spec_corr));
        if (c.curve) {
          for (std::size_t j = 0; j < c.curve->topk.size(); ++j) {
            const int kk = static_cast<int>(j) + 1;
            topk.row(tr, te, kk, num(c.curve->topk[j]), num(c.curve->chance(kk)));
          }
        }
        for (std::size_t j = 0; j < c.null_realization_means.size(); ++j) {
          null_means.row(tr, te, j, num(c.null_realization_means[j]));
        }
        for (std::size_t j = 0; j < c.null_trial_corrs.size(); ++j) null_trials.row(tr, te, j, num(c.null_trial_corrs[j]));
        json cj{{"train", tr}, {"test", te}, {"n", c.n}, {"mean_env_corr", c.mean_env_corr}};
        if (c.curve) cj["auc_norm"] = c.curve->auc_norm;
        if (c.stat) {
          cj["p_perm"] = c.stat->p_value;
          if (c.stat->effect_size_d) cj["cohens_d"] = *c.stat->effect_size_d;
        }
        fam_summary["cells"].push_back(cj);
      }
    }
    cells.close();
    trials.close();
    topk.close();
    null_means.close();
    null_trials.close();

    CsvFile fits(path(fam + "_fits.csv"), "train,kind,index,value_a,value_b,value_c");
    for (std::size_t i = 0; i < 3; ++i) {
      const FitInfo& info = r.fits[i];
      if (info.search) {
        fits.row(cond(i), "alpha_star", 0, num(info.alpha), "", "");
        for (std::size_t j = 0; j < info.search->grid.size(); ++j) {
          fits.row(cond(i), "alpha_score", j, num(info.search->grid[j]), num(info.search->scores[j]), "");
        }
      }
      if (!info.history.empty()) {
        fits.row(cond(i), "best_epoch", 0, info.best_epoch, "", "");
        for (const auto& e : info.history) {
          fits.row(cond(i), "loss", e.epoch, num(e.train_mse), num(e.val_mse), "");
        }
      }
    }
    fits.close();
    summary["families"].push_back(fam_summary);
  }

  {
    CsvFile f(path("model_comparison.csv"), "family,train,test,mean_env_corr,auc_norm");
    CsvFile lines(path("fit_lines.csv"), "family,slope,intercept,r");
    if (result.comparison) {
      for (const auto& l : result.comparison->lines) {
        for (std::size_t i = 0; i < 9; ++i) {
          f.row(l.family, cond(i / 3), cond(i % 3), num(l.mean_env_corr[i]), num(l.auc_norm[i]));
        }
        if (l.fit) lines.row(l.family, num(l.fit->slope), num(l.fit->intercept), num(l.fit->r));
      }
      summary["model_comparison"] = comparison_json(*result.comparison);
    }
    f.close();
    lines.close();
  }

  write_stats(path("stats.csv"), stat_rows(result));
  write_json(path("summary.json"), summary);
  return written;
}

namespace {

using Table = std::vector<std::map<std::string, std::string>>;

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  const auto header = split_line(line);
  Table t;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields");
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = fields[i];
    t.push_back(std::move(row));
  }
  return t;
}

double to_double(const std::string& s, const fs::path& where) {
  if (s == "nan") return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where.string() + ": bad number '" + s + "'");
  }
}

std::size_t cond_index(const std::string& s) { return index_of(parse_condition(s)); }

}  // namespace

std::vector<StatRow> recompute_stats(const fs::path& dir, long n_permutations, std::uint64_t seed) {
  std::vector<StatRow> rows;
  std::vector<GridReport> reports;
  for (const std::string fam : {"linear", "nonlinear"}) {
    const fs::path cells_path = dir / (fam + "_cells.csv");
    if (!fs::exists(cells_path)) continue;
    GridReport r;
    r.family = fam;
    r.seed = seed;
    for (const auto& row : read_table(cells_path)) {
      CellResult& c = r.cells[cond_index(row.at("train"))][cond_index(row.at("test"))];
      c.n = std::stoi(row.at("n"));
      c.mean_env_corr = to_double(row.at("mean_env_corr"), cells_path);
      if (!row.at("auc_norm").empty()) {
        TopKCurve curve;
        curve.auc_norm = to_double(row.at("auc_norm"), cells_path);
        c.curve = curve;
      }
    }
    const fs::path trials_path = dir / (fam + "_trials.csv");
    for (const auto& row : read_table(trials_path)) {
      CellResult& c = r.cells[cond_index(row.at("train"))][cond_index(row.at("test"))];
      TrialScore t;
      t.sentence_id = std::stoi(row.at("sentence_id"));
      t.repetition = std::stoi(row.at("repetition"));
      t.env_corr = to_double(row.at("env_corr"), trials_path);
      t.spec_corr = to_double(row.at("spec_corr"), trials_path);
      c.trials.push_back(t);
    }
    const fs::path null_path = dir / (fam + "_null_trials.csv");
    const fs::path means_path = dir / (fam + "_null_means.csv");
    const auto null_rows = read_table(null_path);
    for (const auto& row : null_rows) {
      r.cells[cond_index(row.at("train"))][cond_index(row.at("test"))].null_trial_corrs.push_back(
          to_double(row.at("env_corr"), null_path));
    }
    for (const auto& row : read_table(means_path)) {
      r.cells[cond_index(row.at("train"))][cond_index(row.at("test"))].null_realization_means.push_back(
          to_double(row.at("mean_env_corr"), means_path));
    }
    r.has_nulls = !null_rows.empty();
    if (r.has_nulls) {
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
          CellResult& c = r.cells[i][k];
          std::vector<double> observed;
          for (const auto& t : c.trials) {
            if (!std::isnan(t.env_corr)) observed.push_back(t.env_corr);
          }
          if (!observed.empty() && !c.null_trial_corrs.empty()) {
            c.stat = permutation_pvalue(observed, c.null_trial_corrs, Alternative::Greater, n_permutations,
                                        derive_seed(seed, 5000 + 3 * i + k));
          }
          int hits = 0;
          for (double m : c.null_realization_means) hits += (!std::isnan(m) && m >= c.mean_env_corr) ? 1 : 0;
          c.p_realization = static_cast<double>(1 + hits) / static_cast<double>(1 + c.null_realization_means.size());
        }
      }
    }
    reports.push_back(std::move(r));
  }
  if (reports.empty()) throw DataError("no <family>_cells.csv tables found in " + dir.string());
  // The realization-mean rows carry the null seed, which only config.json knows.
  std::uint64_t null_seed_linear = 0, null_seed_nn = 0;
  const fs::path cfg = dir / "config.json";
  if (fs::exists(cfg)) {
    std::ifstream in(cfg);
    try {
      const RunConfig c = run_config_from_json(json::parse(in));
      null_seed_linear = c.null_spec.seed;
      null_seed_nn = c.nn_null_spec.seed;
    } catch (const json::exception& e) {
      throw DataError(cfg.string() + ": " + e.what());
    }
  }
  for (auto& r : reports) {
    r.null_spec.seed = r.family == "nonlinear" ? null_seed_nn : null_seed_linear;
    append_cell_rows(r, rows);
  }
  if (reports.size() == 2) append_comparison_rows(run_model_comparison(reports[0], reports[1]), seed, rows);
  write_stats(dir / "stats.csv", rows);
  return rows;
}

}  // namespace xcond
