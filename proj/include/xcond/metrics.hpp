#pragma once

#include "xcond/types.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace xcond {

// Frequency-averaged spectrogram trace: values[t] = mean_f spec(f, t).
Eigen::VectorXd envelope(const Eigen::MatrixXd& spec);
Eigen::VectorXd envelope(const StimulusSpectrogram& spec);

// Pearson correlation. Throws UndefinedCorrelation if either input has zero variance,
// DataError on length mismatch or fewer than two samples.
double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);
// Same, but returns nullopt for the zero-variance case.
std::optional<double> try_pearson(const Eigen::Ref<const Eigen::VectorXd>& a,
                                  const Eigen::Ref<const Eigen::VectorXd>& b);

// Pearson over all F*T entries.
double spectrogram_correlation(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);
double spectrogram_correlation(const StimulusSpectrogram& pred, const StimulusSpectrogram& target);

struct TopKCurve {
  std::vector<double> topk;  // topk[k-1] = fraction of queries whose correct candidate ranks <= k
  int n = 0;                 // gallery size N
  double auc_raw = 0.0;      // sum_k (topk(k) - k/N)
  double auc_norm = 0.0;     // auc_raw / ((N-1)/2)

  double chance(int k) const { return static_cast<double>(k) / n; }

  // Builds the curve from 1-based ranks of the correct candidate among N.
  static TopKCurve from_ranks(std::span<const int> ranks, int n);
  // Validates a curve given directly as Top_k values; throws DataError if not a valid curve.
  static TopKCurve from_topk(std::vector<double> topk);
};

struct AucAboveChance {
  double raw = 0.0;
  double norm = 0.0;
};

AucAboveChance auc_above_chance(const TopKCurve& curve);

// 1-based rank of candidate `correct` among `scores` in descending order. Ties are
// pessimistic: the correct candidate is placed after every candidate with an equal
// score. NaN scores rank last; a NaN score on the correct candidate gives rank N.
int pessimistic_rank(const Eigen::Ref<const Eigen::VectorXd>& scores, Eigen::Index correct);

struct LabeledEnvelope {
  int sentence_id = 0;
  Eigen::VectorXd values;
};

struct RankAnalysis {
  TopKCurve curve;
  Eigen::MatrixXd scores;  // queries x gallery correlations (NaN where undefined)
  std::vector<int> ranks;  // per query
  int undefined_comparisons = 0;
};

// Each query is correlated against every gallery candidate (both truncated to the
// shorter length) and ranked. The gallery must hold each sentence id once and the
// query id set must equal the gallery id set. Undefined correlations score as
// rank-worst and are counted.
RankAnalysis rank_analysis(std::span<const LabeledEnvelope> queries, std::span<const LabeledEnvelope> gallery);

// Rank analysis from a precomputed score matrix whose correct candidate for row i is
// column correct[i].
RankAnalysis rank_scores(const Eigen::MatrixXd& scores, std::span<const Eigen::Index> correct);

}  // namespace xcond
