#pragma once

// Cluster-quality analytics and retrieval evaluation. NMI treats outliers as
// singleton clusters; purity, chaos and the variances iterate over clusters
// only. All functions are pure and match enumeration oracles exactly at small n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include "gsamp/clustering.hpp"
#include "gsamp/core.hpp"

namespace gsamp {

// One row of the per-epoch analytics record.
struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t num_clusters = 0;
  std::size_t num_outliers = 0;
  double nmi = 0.0;
  double purity = std::numeric_limits<double>::quiet_NaN();
  double chaos = std::numeric_limits<double>::quiet_NaN();
  double intra_var = std::numeric_limits<double>::quiet_NaN();
  double inter_var = std::numeric_limits<double>::quiet_NaN();
  double correction_rate = 0.0;
  double misleading_rate = 0.0;
  double mean_loss = std::numeric_limits<double>::quiet_NaN();
  double map = std::numeric_limits<double>::quiet_NaN();
  double top1 = std::numeric_limits<double>::quiet_NaN();
  double top5 = std::numeric_limits<double>::quiet_NaN();
  double top10 = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void check_lengths(const PseudoLabeling& labels, const GroundTruth& gt) {
  if (labels.size() != gt.size() || gt.identity.size() != gt.camera.size())
    raise(Errc::ShapeMismatch, "labels and ground truth lengths differ");
}

inline double entropy(const std::map<int, std::size_t>& counts, std::size_t n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace detail

// NMI = 2 I(U;V) / (H(U) + H(V)) with natural logs; outliers enter the
// predicted partition as singleton clusters. Returns 1 when both entropies
// vanish, 0 when either partition carries no information about the other.
inline double nmi(const PseudoLabeling& labels, const GroundTruth& gt) {
  detail::check_lengths(labels, gt);
  const std::size_t n = labels.size();

  // Predicted partition: cluster ids, then one fresh id per outlier.
  std::vector<int> pred(n);
  int next = static_cast<int>(labels.num_clusters());
  for (std::size_t i = 0; i < n; ++i)
    pred[i] = labels.assignment[i] == kOutlier ? next++ : labels.assignment[i];

  std::map<int, std::size_t> cu, cv;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < n; ++i) {
    ++cu[pred[i]];
    ++cv[gt.identity[i]];
    ++joint[{pred[i], gt.identity[i]}];
  }
  const double hu = detail::entropy(cu, n);
  const double hv = detail::entropy(cv, n);
  if (hu == 0.0 && hv == 0.0) return 1.0;

  double mi = 0.0;
  for (const auto& [uv, c] : joint) {
    const double puv = static_cast<double>(c) / static_cast<double>(n);
    const double pu = static_cast<double>(cu[uv.first]) / static_cast<double>(n);
    const double pv = static_cast<double>(cv[uv.second]) / static_cast<double>(n);
    mi += puv * std::log(puv / (pu * pv));
  }
  return 2.0 * mi / (hu + hv);
}

// Mean number of distinct identities per cluster; >= 1, equals 1 iff every
// cluster is single-identity. Outliers are excluded.
inline double chaos(const PseudoLabeling& labels, const GroundTruth& gt) {
  detail::check_lengths(labels, gt);
  if (labels.num_clusters() == 0) raise(Errc::NoClusters, "chaos: no clusters");
  std::size_t total = 0;
  std::vector<int> ids;
  for (const auto& members : labels.clusters) {
    ids.clear();
    for (const SampleId s : members) ids.push_back(gt.identity[s]);
    std::sort(ids.begin(), ids.end());
    total += static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
  }
  return static_cast<double>(total) / static_cast<double>(labels.num_clusters());
}

// Mean dominant-identity fraction per cluster; in (0, 1].
inline double purity(const PseudoLabeling& labels, const GroundTruth& gt) {
  detail::check_lengths(labels, gt);
  if (labels.num_clusters() == 0) raise(Errc::NoClusters, "purity: no clusters");
  double total = 0.0;
  std::map<int, std::size_t> counts;
  for (const auto& members : labels.clusters) {
    counts.clear();
    for (const SampleId s : members) ++counts[gt.identity[s]];
    std::size_t best = 0;
    for (const auto& [_, c] : counts) best = std::max(best, c);
    total += static_cast<double>(best) / static_cast<double>(members.size());
  }
  return total / static_cast<double>(labels.num_clusters());
}

struct VariancePair {
  double intra = 0.0;
  double inter = 0.0;
};

// intra = (1/K) sum_i (1/|C_i|) sum_{v in C_i} ||v - mu_i||^2
// inter = (1/K) sum_i ||mu_i - mu_bar||^2
// with mu_i the unnormalized cluster means and mu_bar their mean.
inline VariancePair variances(const FeatureMatrix& f, const PseudoLabeling& labels) {
  if (labels.num_clusters() == 0) raise(Errc::NoClusters, "variances: no clusters");
  if (f.n() != labels.size()) raise(Errc::ShapeMismatch, "features and labels lengths differ");
  const std::size_t k = labels.num_clusters();
  const std::size_t dim = f.dim();

  std::vector<std::vector<double>> means(k, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < k; ++c) {
    for (const SampleId s : labels.clusters[c]) {
      const auto row = f.row(s);
      for (std::size_t d = 0; d < dim; ++d) means[c][d] += row[d];
    }
    for (double& x : means[c]) x /= static_cast<double>(labels.clusters[c].size());
  }

  VariancePair out;
  for (std::size_t c = 0; c < k; ++c) {
    double acc = 0.0;
    for (const SampleId s : labels.clusters[c]) {
      const auto row = f.row(s);
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = row[d] - means[c][d];
        acc += diff * diff;
      }
    }
    out.intra += acc / static_cast<double>(labels.clusters[c].size());
  }
  out.intra /= static_cast<double>(k);

  std::vector<double> grand(dim, 0.0);
  for (const auto& m : means)
    for (std::size_t d = 0; d < dim; ++d) grand[d] += m[d];
  for (double& x : grand) x /= static_cast<double>(k);
  for (const auto& m : means) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = m[d] - grand[d];
      acc += diff * diff;
    }
    out.inter += acc;
  }
  out.inter /= static_cast<double>(k);
  return out;
}

// Per-sample flag: true iff the sample sits in a cluster whose principal
// identity (most frequent; ties to the smaller label) matches its own.
// Outliers count as incorrect.
inline std::vector<bool> correctness(const PseudoLabeling& labels, const GroundTruth& gt) {
  detail::check_lengths(labels, gt);
  std::vector<bool> out(labels.size(), false);
  std::map<int, std::size_t> counts;
  for (const auto& members : labels.clusters) {
    counts.clear();
    for (const SampleId s : members) ++counts[gt.identity[s]];
    int principal = 0;
    std::size_t best = 0;
    for (const auto& [id, c] : counts) {
      if (c > best) {
        best = c;
        principal = id;
      }
    }
    for (const SampleId s : members) out[s] = gt.identity[s] == principal;
  }
  return out;
}

struct TransitionRates {
  double correction = 0.0;
  double misleading = 0.0;
};

// correction = |wrong(prev) ∩ right(curr)| / max(1, |wrong(prev)|)
// misleading = |right(prev) ∩ wrong(curr)| / max(1, |right(prev)|)
inline TransitionRates correction_misleading(const std::vector<bool>& prev,
                                             const std::vector<bool>& curr) {
  if (prev.size() != curr.size())
    raise(Errc::ShapeMismatch, "correctness vectors differ in length");
  std::size_t wrong_prev = 0, right_prev = 0, corrected = 0, misled = 0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (prev[i]) {
      ++right_prev;
      if (!curr[i]) ++misled;
    } else {
      ++wrong_prev;
      if (curr[i]) ++corrected;
    }
  }
  TransitionRates r;
  r.correction = static_cast<double>(corrected) / static_cast<double>(std::max<std::size_t>(1, wrong_prev));
  r.misleading = static_cast<double>(misled) / static_cast<double>(std::max<std::size_t>(1, right_prev));
  return r;
}

struct RetrievalScores {
  double map = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double top10 = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

// Single-query retrieval. Gallery items sharing the query's identity AND
// camera are excluded; positives are remaining same-identity items. Ranking
// is by ascending base distance with ties broken by smaller gallery id.
// Queries left without a valid positive are skipped and counted.
inline RetrievalScores retrieval_eval(const FeatureMatrix& query_f, const GroundTruth& query_gt,
                                      const FeatureMatrix& gallery_f,
                                      const GroundTruth& gallery_gt) {
  validate_matrix(query_f);
  validate_matrix(gallery_f);
  if (!query_f.unit_rows() || !gallery_f.unit_rows())
    raise(Errc::NotNormalized, "retrieval_eval requires unit rows");
  if (query_f.n() != query_gt.size() || gallery_f.n() != gallery_gt.size())
    raise(Errc::ShapeMismatch, "features and ground truth lengths differ");
  if (query_f.dim() != gallery_f.dim())
    raise(Errc::ShapeMismatch, "query and gallery dims differ");

  RetrievalScores out;
  double ap_sum = 0.0;
  std::size_t hit1 = 0, hit5 = 0, hit10 = 0;

  std::vector<std::size_t> keep;
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t q = 0; q < query_f.n(); ++q) {
    keep.clear();
    std::size_t positives = 0;
    for (std::size_t g = 0; g < gallery_f.n(); ++g) {
      const bool same_id = gallery_gt.identity[g] == query_gt.identity[q];
      const bool same_cam = gallery_gt.camera[g] == query_gt.camera[q];
      if (same_id && same_cam) continue;
      keep.push_back(g);
      if (same_id) ++positives;
    }
    if (positives == 0) {
      ++out.skipped;
      continue;
    }
    ranked.clear();
    for (const std::size_t g : keep)
      ranked.emplace_back(1.0 - dot(query_f.row(q), gallery_f.row(g)), g);
    std::sort(ranked.begin(), ranked.end());

    double ap = 0.0;
    std::size_t seen = 0;
    std::size_t first_hit = ranked.size();
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      if (gallery_gt.identity[ranked[r].second] == query_gt.identity[q]) {
        ++seen;
        ap += static_cast<double>(seen) / static_cast<double>(r + 1);
        if (first_hit == ranked.size()) first_hit = r;
      }
    }
    ap /= static_cast<double>(positives);
    ap_sum += ap;
    if (first_hit < 1) ++hit1;
    if (first_hit < 5) ++hit5;
    if (first_hit < 10) ++hit10;
    ++out.evaluated;
  }
  if (out.evaluated == 0) raise(Errc::NoValidQueries, "retrieval_eval: every query was skipped");
  out.map = ap_sum / static_cast<double>(out.evaluated);
  out.top1 = static_cast<double>(hit1) / static_cast<double>(out.evaluated);
  out.top5 = static_cast<double>(hit5) / static_cast<double>(out.evaluated);
  out.top10 = static_cast<double>(hit10) / static_cast<double>(out.evaluated);
  return out;
}

}  // namespace gsamp
