#include "xcond/metrics.hpp"

#include "xcond/error.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace xcond {

Eigen::VectorXd envelope(const Eigen::MatrixXd& spec) {
  if (spec.rows() < 1) throw DataError("envelope: spectrogram has no frequency rows");
  return spec.colwise().mean().transpose();
}

Eigen::VectorXd envelope(const StimulusSpectrogram& spec) { return envelope(spec.data); }

std::optional<double> try_pearson(const Eigen::Ref<const Eigen::VectorXd>& a,
                                  const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) {
    throw DataError("pearson: length mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw DataError("pearson: need at least two samples");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = (da * da).sum();
  const double sbb = (db * db).sum();
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  const double r = (da * db).sum() / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (auto r = try_pearson(a, b)) return *r;
  throw UndefinedCorrelation("pearson: zero variance input, correlation undefined");
}

double spectrogram_correlation(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DataError("spectrogram_correlation: shape mismatch");
  }
  return pearson(pred.reshaped(), target.reshaped());
}

double spectrogram_correlation(const StimulusSpectrogram& pred, const StimulusSpectrogram& target) {
  return spectrogram_correlation(pred.data, target.data);
}

TopKCurve TopKCurve::from_ranks(std::span<const int> ranks, int n) {
  if (n < 2) throw DataError("rank analysis needs N >= 2 candidates");
  if (ranks.empty()) throw DataError("rank analysis needs at least one query");
  std::vector<int> counts(n + 1, 0);
  for (int r : ranks) {
    if (r < 1 || r > n) throw DataError("rank out of range");
    ++counts[r];
  }
  std::vector<double> topk(n);
  int cumulative = 0;
  for (int k = 1; k <= n; ++k) {
    cumulative += counts[k];
    topk[k - 1] = static_cast<double>(cumulative) / static_cast<double>(ranks.size());
  }
  return from_topk(std::move(topk));
}

TopKCurve TopKCurve::from_topk(std::vector<double> topk) {
  const int n = static_cast<int>(topk.size());
  if (n < 2) throw DataError("top-k curve needs N >= 2");
  for (int k = 0; k < n; ++k) {
    if (!(topk[k] >= 0.0 && topk[k] <= 1.0)) throw DataError("top-k values must lie in [0, 1]");
    if (k > 0 && topk[k] < topk[k - 1]) throw DataError("top-k curve must be nondecreasing");
  }
  if (topk.back() != 1.0) throw DataError("top-k curve must reach 1 at k = N");
  TopKCurve c;
  c.topk = std::move(topk);
  c.n = n;
  const auto auc = auc_above_chance(c);
  c.auc_raw = auc.raw;
  c.auc_norm = auc.norm;
  return c;
}

AucAboveChance auc_above_chance(const TopKCurve& curve) {
  const int n = curve.n;
  // Sum Top_k exactly, then subtract the closed-form chance mass (N+1)/2.
  double sum = 0.0;
  for (double v : curve.topk) sum += v;
  AucAboveChance a;
  a.raw = sum - (n + 1) / 2.0;
  a.norm = a.raw / ((n - 1) / 2.0);
  return a;
}

int pessimistic_rank(const Eigen::Ref<const Eigen::VectorXd>& scores, Eigen::Index correct) {
  const double own = scores[correct];
  if (std::isnan(own)) return static_cast<int>(scores.size());
  int rank = 1;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    if (j != correct && !std::isnan(scores[j]) && scores[j] >= own) ++rank;
  }
  return rank;
}

RankAnalysis rank_scores(const Eigen::MatrixXd& scores, std::span<const Eigen::Index> correct) {
  if (static_cast<Eigen::Index>(correct.size()) != scores.rows()) {
    throw DataError("rank_scores: one correct index per query required");
  }
  RankAnalysis out;
  out.scores = scores;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    if (correct[i] < 0 || correct[i] >= scores.cols()) throw DataError("rank_scores: correct index out of range");
    out.ranks.push_back(pessimistic_rank(scores.row(i).transpose(), correct[i]));
    for (Eigen::Index j = 0; j < scores.cols(); ++j) out.undefined_comparisons += std::isnan(scores(i, j)) ? 1 : 0;
  }
  out.curve = TopKCurve::from_ranks(out.ranks, static_cast<int>(scores.cols()));
  return out;
}

RankAnalysis rank_analysis(std::span<const LabeledEnvelope> queries, std::span<const LabeledEnvelope> gallery) {
  std::map<int, Eigen::Index> column;
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    if (!column.emplace(gallery[j].sentence_id, static_cast<Eigen::Index>(j)).second) {
      throw DataError("rank analysis: duplicate sentence " + std::to_string(gallery[j].sentence_id) + " in gallery");
    }
  }
  std::set<int> query_ids;
  for (const auto& q : queries) query_ids.insert(q.sentence_id);
  for (const auto& q : queries) {
    if (!column.count(q.sentence_id)) {
      throw DataError("rank analysis: query sentence " + std::to_string(q.sentence_id) + " missing from gallery");
    }
  }
  if (query_ids.size() != column.size()) throw DataError("rank analysis: query and gallery sentence sets differ");

  const auto nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(gallery.size()));
  std::vector<Eigen::Index> correct;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    correct.push_back(column.at(queries[i].sentence_id));
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      const Eigen::Index len = std::min(queries[i].values.size(), gallery[j].values.size());
      std::optional<double> r;
      if (len >= 2) r = try_pearson(queries[i].values.head(len), gallery[j].values.head(len));
      scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.value_or(nan);
    }
  }
  return rank_scores(scores, correct);
}

}  // namespace xcond
