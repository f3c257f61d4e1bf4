// Acceptance suite: one PASS/FAIL line per criterion.
//   xcond_acceptance [--cli PATH] [--only N]
// Exit status is nonzero when any selected criterion fails.

#include "helpers.hpp"
#include "oracles.hpp"
#include "xcond/lag.hpp"
#include "xcond/metrics.hpp"
#include "xcond/nn.hpp"
#include "xcond/nulls.hpp"
#include "xcond/pipeline.hpp"
#include "xcond/ridge.hpp"
#include "xcond/rng.hpp"
#include "xcond/stats.hpp"
#include "xcond/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace xcond;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string cli_path;

// 1. fit_ridge against a Gauss-Jordan solve of the normal equations.
Outcome ridge_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> pick_c(1, 6), pick_f(1, 8), pick_t(20, 500);
  std::uniform_real_distribution<double> log_alpha(-1.0, 1.0);
  double worst = 0.0;
  int gram = 0;
  for (int sys = 0; sys < 50; ++sys) {
    const bool wide = sys % 5 == 0;
    const int c = wide ? std::uniform_int_distribution<int>(3, 6)(rng) : pick_c(rng);
    const int max_lags = 60 / c;
    const int n_lags = std::uniform_int_distribution<int>(1, max_lags)(rng);
    const LagSpec lags = LagSpec::range(-(n_lags / 3), n_lags - 1 - n_lags / 3);
    // Every fifth system is wide (P > T) to exercise the Gram form.
    const int t = wide ? std::max(lags.max_abs() + 1, c * n_lags / 2) : pick_t(rng);
    const Eigen::MatrixXd x = build_lag_matrix(oracle::random_matrix(c, t, rng), lags);
    const Eigen::MatrixXd s = oracle::random_matrix(pick_f(rng), t, rng);
    const double alpha = std::pow(10.0, log_alpha(rng));
    gram += x.rows() > x.cols() ? 1 : 0;
    const LinearDecoder d = fit_ridge(x, s, alpha, lags);
    worst = std::max(worst, (d.G - oracle::ridge_normal_equations(x, s, alpha)).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-8 && secs < 10.0,
          fmt("50 systems (%d in Gram form), max abs err %.2e (< 1e-8), %.2f s (< 10 s)", gram, worst, secs)};
}

// 2. Noiseless recovery of a known decoder.
Outcome exact_recovery() {
  std::mt19937_64 rng(202);
  const Eigen::Index c = 5, f = 4;
  const LagSpec lags = LagSpec::range(0, 6);
  const Eigen::MatrixXd g = oracle::random_matrix(c * lags.size(), f, rng);
  std::vector<Eigen::MatrixXd> xs;
  Eigen::MatrixXd x(c * lags.size(), 0), s(f, 0);
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::MatrixXd xl = build_lag_matrix(oracle::random_matrix(c, 200, rng), lags);
    Eigen::MatrixXd nx(x.rows(), x.cols() + xl.cols()), ns(f, s.cols() + xl.cols());
    nx << x, xl;
    ns << s, g.transpose() * xl;
    x = std::move(nx);
    s = std::move(ns);
  }
  const LinearDecoder d = fit_ridge(x, s, 1e-8, lags);
  const double rel = (d.G - g).norm() / g.norm();
  const Eigen::MatrixXd test = oracle::random_matrix(c, 300, rng);
  const Eigen::MatrixXd truth = g.transpose() * build_lag_matrix(test, lags);
  const double r = pearson(envelope(predict(d, test)), envelope(truth));
  return {rel < 1e-4 && r > 0.999, fmt("rel Frobenius err %.2e (< 1e-4), test envelope corr %.12f (> 0.999)", rel, r)};
}

// 3. Transfer identities on 10 seeds, trained and random decoders.
Outcome transfer_identities() {
  double worst_a = 0.0, worst_b = 0.0;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SynthResult r = generate(SourceConfig{}, 10, 150, 16, seed);
    const LagSpec lags = LagSpec::from_window(r.dataset.sample_rate_hz(), 100.0);
    std::vector<LinearDecoder> decoders;
    for (Condition c : kConditions) decoders.push_back(fit_linear_decoder(r.dataset.select(c), lags, 1.0, c));
    std::mt19937_64 rng(derive_seed(seed, 9));
    LinearDecoder rnd;
    rnd.G = oracle::random_matrix(16 * lags.size(), r.dataset.freqs(), rng);
    rnd.lagspec = lags;
    rnd.intercept = Eigen::VectorXd::Zero(r.dataset.freqs());
    decoders.push_back(rnd);
    for (const auto& d : decoders) {
      const auto rep = verify_transfer_identities(d, r.sources);
      worst_a = std::max(worst_a, rep.max_dev_vocalized_minus_mimed);
      worst_b = std::max(worst_b, rep.max_dev_mimed_minus_imagined);
      ++checked;
    }
  }
  return {worst_a < 1e-10 && worst_b < 1e-10,
          fmt("%d decoders over 10 seeds, max dev (a) %.2e, (b) %.2e (< 1e-10)", checked, worst_a, worst_b)};
}

// 4. M->M ~ M->V > M->I on the canonical hierarchy.
Outcome transfer_ordering() {
  int holds = 0;
  double slowest = 0.0;
  std::string worst;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const OrderingResult o = transfer_ordering_experiment(SourceConfig{}, seed);
    slowest = std::max(slowest, seconds_since(t0));
    holds += o.holds ? 1 : 0;
    if (!o.holds) worst += fmt(" [seed %d: mm-mv %.3f, mm-mi %.3f, mv-mi %.3f]", static_cast<int>(seed),
                               o.mm_minus_mv, o.mm_minus_mi, o.mv_minus_mi);
  }
  return {holds >= 9 && slowest < 60.0,
          fmt("ordering holds in %d/10 seeds (>= 9), slowest seed %.2f s (< 60 s)", holds, slowest) + worst};
}

// 5. Perfect retrieval gives AUC 1; random scores average to zero.
Outcome rank_calibration() {
  std::mt19937_64 rng(505);
  std::vector<LabeledEnvelope> gallery;
  for (int s = 0; s < 100; ++s) gallery.push_back({s, oracle::random_matrix(50, 1, rng)});
  const double perfect = rank_analysis(gallery, gallery).curve.auc_norm;
  std::vector<Eigen::Index> correct(100);
  std::iota(correct.begin(), correct.end(), 0);
  double sum = 0.0;
  for (int d = 0; d < 1000; ++d) sum += rank_scores(oracle::random_matrix(100, 100, rng), correct).curve.auc_norm;
  const double m = sum / 1000.0;
  return {perfect == 1.0 && std::abs(m) < 0.02,
          fmt("perfect auc_norm %.17g (== 1), random mean auc_norm %+.4f over 1000 draws at N=100 (|.| < 0.02)", perfect,
              m)};
}

// 6. Closed-form area for the perfect curve.
Outcome auc_arithmetic() {
  const std::vector<int> ranks(10, 1);
  const TopKCurve c = TopKCurve::from_ranks(ranks, 10);
  return {c.auc_raw == 4.5 && c.auc_norm == 1.0,
          fmt("N=10 perfect curve auc_raw %.17g (== 4.5), auc_norm %.17g", c.auc_raw, c.auc_norm)};
}

// 7. Uniform p under a true null; shuffled-pairing decoders sit at zero correlation.
Outcome null_calibration() {
  std::mt19937_64 rng(707);
  std::normal_distribution<double> g;
  const int reps = 200;
  std::vector<double> ps;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> a(20), b(40);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    ps.push_back(permutation_pvalue(a, b, Alternative::Greater, 999, derive_seed(707, static_cast<std::uint64_t>(r)))
                     .p_value);
  }
  std::sort(ps.begin(), ps.end());
  double sup = 0.0;
  for (int i = 0; i < reps; ++i) {
    const double p = ps[static_cast<std::size_t>(i)];
    sup = std::max({sup, std::abs((i + 1.0) / reps - p), std::abs(static_cast<double>(i) / reps - p)});
  }

  // Shuffled-pairing nulls: a null decoder points in an arbitrary direction of the
  // low-dimensional latent space, so one dataset's null mean carries a chance offset
  // shared by all its realizations. The offset is zero-mean across datasets; the
  // criterion is checked on the mean over 10 datasets.
  RunConfig cfg;
  cfg.alpha_grid = {0.1, 1.0, 10.0, 100.0, 1000.0};
  cfg.lag_window_ms = 50.0;
  cfg.split = SplitFractions{0.6, 0.1, 0.3};
  cfg.n_permutations = 10;
  double total = 0.0, lo = 1.0, hi = -1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.null_spec = NullSpec{NullKind::ShuffledPairing, 20, 71 + seed};
    const RunResult res = run_all(cfg, generate(SourceConfig{}, 20, 150, 16, seed).dataset);
    double sum = 0.0;
    for (const auto& row : res.reports.front().cells) {
      for (const auto& cell : row) sum += mean(cell.null_trial_corrs);
    }
    total += sum / 9.0;
    lo = std::min(lo, sum / 9.0);
    hi = std::max(hi, sum / 9.0);
  }
  const double null_mean = total / 10.0;
  return {sup < 0.1 && std::abs(null_mean) < 0.05,
          fmt("p sup-norm deviation %.4f over 200 reps (< 0.1); shuffled-null mean env corr %+.4f over 10 datasets x 9 "
              "cells x 20 realizations (|.| < 0.05), per-dataset means in [%+.3f, %+.3f]",
              sup, null_mean, lo, hi)};
}

// 8. Analytic vs finite-difference gradients on 5 random nets.
Outcome gradient_check() {
  double worst = 0.0;
  int checked = 0;
  std::mt19937_64 rng(808);
  for (std::uint64_t k = 0; k < 5; ++k) {
    const Eigen::Index c = 2 + static_cast<Eigen::Index>(k % 3), f = 1 + static_cast<Eigen::Index>(k % 2);
    const Eigen::Index h = 3 + static_cast<Eigen::Index>(k), kernel = 1 + 2 * static_cast<Eigen::Index>(k % 3);
    const auto net = nn::init_decoder(c, f, h, kernel, 80 + k);
    const auto r = nn::grad_check(net, oracle::random_matrix(c, 15, rng), oracle::random_matrix(f, 15, rng), 1e-5, k,
                                  1000);
    worst = std::max(worst, r.max_relative_error);
    checked += r.checked;
  }
  return {worst < 1e-4, fmt("5 nets, %d parameters, all 7 groups, max rel err %.2e (< 1e-4)", checked, worst)};
}

// 9. The network learns a linear lagged map.
Outcome nn_learnability() {
  std::mt19937_64 rng(909);
  const Eigen::Index c = 4, f = 3;
  const LagSpec lags = LagSpec::range(0, 2);
  const Eigen::MatrixXd w = 0.5 * oracle::random_matrix(c * lags.size(), f, rng);
  auto make = [&](int n) {
    std::vector<nn::SequencePair> out;
    for (int i = 0; i < n; ++i) {
      const Eigen::MatrixXd x = oracle::random_matrix(c, 100, rng);
      out.push_back({x, w.transpose() * build_lag_matrix(x, lags)});
    }
    return out;
  };
  const auto train_set = make(16), test_set = make(4);
  nn::TrainConfig cfg;
  cfg.epochs = 500;
  cfg.learning_rate = 1e-2;
  cfg.batch_trials = 4;
  cfg.seed = 9;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = nn::train(nn::init_decoder(c, f, 16, 5, 9), train_set, {}, cfg);
  const double secs = seconds_since(t0);
  const double first = res.history.front().train_mse;
  double best = first;
  for (const auto& e : res.history) best = std::min(best, e.train_mse);
  const double reduction = 1.0 - best / first;
  double corr = 0.0;
  for (const auto& p : test_set) corr += pearson(envelope(nn::forward(res.decoder, p.input)), envelope(p.target));
  corr /= static_cast<double>(test_set.size());
  return {reduction >= 0.9 && corr > 0.8,
          fmt("train MSE %.4f -> %.4f (%.1f%% reduction, >= 90%%) in 500 epochs, test envelope corr %.4f (> 0.8), "
              "%.1f s",
              first, best, 100.0 * reduction, corr, secs)};
}

// 10. Steiger's test against the published worked example.
Outcome steiger_example() {
  // The published example could not be obtained offline. What can be checked is the
  // implementation against an independent 40-digit evaluation of the same formula on
  // the commonly cited example inputs.
  const auto a = steiger_test(0.4, 0.5, 0.1, 103);
  const double dz = std::abs(a.statistic - (-0.88871846995587277732));
  const double dp = std::abs(a.p_value - 0.37415440217200173474);
  return {false, fmt("NOT VERIFIED: published reference values unavailable offline; implementation agrees with an "
                     "independent high-precision evaluation (n=103, r=.4/.5/.1: Z %.6f, p %.6f, |dZ| %.1e, |dp| %.1e)",
                     a.statistic, a.p_value, dz, dp)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 11. Two CLI runs with different worker counts write identical CSVs.
Outcome determinism() {
  if (cli_path.empty()) return {false, "no --cli path given"};
  testutil::TempDir dir("acceptance11");
  const std::string d = dir.path().string();
  const std::string cli = "\"" + cli_path + "\"";
  const std::string quiet = " >/dev/null 2>&1";
  if (std::system((cli + " synth -o \"" + d + "/data\" --sentences 12 --samples 120 --channels 12 --seed 3" + quiet)
                      .c_str()) != 0) {
    return {false, "synth failed"};
  }
  const std::string args = " run -m \"" + d +
                           "/data/manifest.json\" --split 0.6 0.1 0.3 --null-realizations 2 --n-permutations 200 "
                           "--decoders both --epochs 5 --hidden 4 --kernel 3 -o \"" +
                           d;
  for (const auto& [workers, out] : {std::pair{"1", "/r1"}, std::pair{"4", "/r2"}}) {
    const std::string cmd = std::string("XCOND_WORKERS=") + workers + " " + cli + args + out + "\"" + quiet;
    if (std::system(cmd.c_str()) != 0) return {false, std::string("run failed with XCOND_WORKERS=") + workers};
  }
  int files = 0;
  std::string differing;
  for (const auto& e : fs::directory_iterator(dir.path() / "r1")) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    if (slurp(e.path()) != slurp(dir.path() / "r2" / e.path().filename())) differing += " " + e.path().filename().string();
  }
  return {files > 0 && differing.empty(),
          fmt("%d CSVs byte-identical across two runs (workers 1 vs 4, both decoder families)", files) +
              (differing.empty() ? "" : "; differ:" + differing)};
}

// 12. Model comparison on hand-built reports.
Outcome model_comparison() {
  const std::array<double, 9> ca{0.82, 0.55, 0.21, 0.60, 0.78, 0.30, 0.12, 0.25, 0.70};
  const std::array<double, 9> aa{0.90, 0.45, 0.05, 0.52, 0.88, 0.20, -0.02, 0.18, 0.66};
  const std::array<double, 9> cb{0.70, 0.40, 0.18, 0.44, 0.66, 0.31, 0.10, 0.22, 0.58};
  const std::array<double, 9> ab{0.85, 0.30, 0.10, 0.41, 0.80, 0.28, 0.04, 0.12, 0.55};
  auto report = [](const std::string& fam, const auto& corr, const auto& auc) {
    GridReport r;
    r.family = fam;
    for (std::size_t i = 0; i < 9; ++i) {
      r.cells[i / 3][i % 3].n = 10;
      r.cells[i / 3][i % 3].mean_env_corr = corr[i];
      r.cells[i / 3][i % 3].curve = TopKCurve{};
      r.cells[i / 3][i % 3].curve->auc_norm = auc[i];
    }
    return r;
  };
  const ModelComparison m = run_model_comparison(report("linear", ca, aa), report("nonlinear", cb, ab));
  if (!m.computable) return {false, "comparison not computable: " + m.note};

  // Hand computation with plain loops.
  auto mean9 = [](const std::array<double, 9>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / 9;
  };
  auto cov9 = [&](const std::array<double, 9>& a, const std::array<double, 9>& b) {
    const double ma = mean9(a), mb = mean9(b);
    double s = 0;
    for (int i = 0; i < 9; ++i) s += (a[i] - ma) * (b[i] - mb);
    return s;
  };
  auto r9 = [&](const auto& a, const auto& b) { return cov9(a, b) / std::sqrt(cov9(a, a) * cov9(b, b)); };
  const double slope_a = cov9(ca, aa) / cov9(ca, ca), slope_b = cov9(cb, ab) / cov9(cb, cb);
  std::array<double, 9> shared{};
  for (int i = 0; i < 9; ++i) shared[i] = 0.5 * (aa[i] + ab[i]);
  const double r1 = r9(shared, ca), r2 = r9(shared, cb), r12 = r9(ca, cb);
  const double rb = 0.5 * (r1 + r2), rb2 = rb * rb;
  const double psi = r12 * (1 - 2 * rb2) - 0.5 * rb2 * (1 - 2 * rb2 - r12 * r12);
  const double s = psi / ((1 - rb2) * (1 - rb2));
  const double z = (0.5 * std::log((1 + r1) / (1 - r1)) - 0.5 * std::log((1 + r2) / (1 - r2))) * std::sqrt(6.0) /
                   std::sqrt(2 - 2 * s);
  const double d_slope_a = std::abs(m.lines[0].fit->slope - slope_a);
  const double d_slope_b = std::abs(m.lines[1].fit->slope - slope_b);
  const double d_z = std::abs(m.steiger->statistic - z);
  return {d_slope_a < 1e-10 && d_slope_b < 1e-10 && d_z < 1e-10,
          fmt("slopes %.6f / %.6f (dev %.1e, %.1e), Steiger Z %.6f (dev %.1e); all < 1e-10", slope_a, slope_b,
              d_slope_a, d_slope_b, z, d_z)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--cli", cli_path, "path to the xcond executable");
  app.add_option("--only", only, "run a single criterion")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ridge oracle equivalence", ridge_oracle},
      {"exact recovery", exact_recovery},
      {"transfer identities", transfer_identities},
      {"transfer ordering", transfer_ordering},
      {"rank-analysis calibration", rank_calibration},
      {"top-k AUC arithmetic", auc_arithmetic},
      {"null calibration", null_calibration},
      {"nonlinear gradient check", gradient_check},
      {"nonlinear learnability", nn_learnability},
      {"Steiger published example", steiger_example},
      {"determinism", determinism},
      {"model-comparison machinery", model_comparison},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
