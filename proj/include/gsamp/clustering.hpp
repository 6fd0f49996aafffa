#pragma once

// DBSCAN over a precomputed distance matrix, packaged as a PseudoLabeling of
// clusters plus an outlier set. Expansion order is pinned (ascending sample
// ids) so identical inputs always produce identical partitions.

#include <cstdint>
#include <deque>
#include <vector>

#include "gsamp/affinity.hpp"
#include "gsamp/core.hpp"

namespace gsamp {

inline constexpr std::int32_t kOutlier = -1;

// Per-sample assignment to one of K clusters or to the outlier set. Every
// sample appears exactly once across clusters and outliers; every cluster
// keeps at least two members (smaller ones are demoted to outliers).
struct PseudoLabeling {
  std::vector<std::int32_t> assignment;          // cluster id or kOutlier
  std::vector<std::vector<SampleId>> clusters;   // ascending member ids
  std::vector<SampleId> outliers;                // ascending

  std::size_t size() const { return assignment.size(); }
  std::size_t num_clusters() const { return clusters.size(); }
};

struct DbscanConfig {
  double eps = 0.6;
  std::size_t min_pts = 4;  // neighborhood count includes the point itself
};

inline void validate_dbscan_config(const DbscanConfig& cfg) {
  if (!(cfg.eps > 0.0)) raise(Errc::ConfigError, "cluster.eps: must be > 0");
  if (cfg.min_pts < 1) raise(Errc::ConfigError, "cluster.min_pts: must be >= 1");
}

// Rebuilds the clusters/outliers member lists from `assignment`, renumbering
// cluster ids densely in order of first appearance by ascending sample id,
// and demoting clusters with fewer than two members to outliers.
inline PseudoLabeling pack_assignment(std::vector<std::int32_t> assignment) {
  const std::size_t n = assignment.size();
  std::int32_t max_id = -1;
  for (const std::int32_t a : assignment)
    if (a > max_id) max_id = a;

  std::vector<std::vector<SampleId>> raw(static_cast<std::size_t>(max_id + 1));
  for (std::size_t i = 0; i < n; ++i)
    if (assignment[i] != kOutlier) raw[static_cast<std::size_t>(assignment[i])].push_back(i);

  PseudoLabeling out;
  out.assignment.assign(n, kOutlier);
  for (auto& members : raw) {
    if (members.size() < 2) continue;
    const auto id = static_cast<std::int32_t>(out.clusters.size());
    for (const SampleId s : members) out.assignment[s] = id;
    out.clusters.push_back(std::move(members));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (out.assignment[i] == kOutlier) out.outliers.push_back(i);
  return out;
}

// DBSCAN. A point is core iff its eps-neighborhood (itself included) holds at
// least min_pts samples. Seeds are scanned in ascending id order, so a border
// point reachable from several clusters lands in the one whose seed core has
// the smallest id.
inline PseudoLabeling dbscan(const DistanceMatrix& dm, const DbscanConfig& cfg) {
  validate_dbscan_config(cfg);
  const std::size_t n = dm.n();

  std::vector<std::vector<SampleId>> neighbors(n);
  std::vector<bool> core(n, false);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (q != p && dm.at(p, q) <= cfg.eps) neighbors[p].push_back(q);
    }
    core[p] = neighbors[p].size() + 1 >= cfg.min_pts;
  }

  constexpr std::int32_t kUnvisited = -2;
  std::vector<std::int32_t> assignment(n, kUnvisited);
  std::int32_t next_cluster = 0;
  std::deque<SampleId> queue;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (assignment[seed] != kUnvisited || !core[seed]) continue;
    assignment[seed] = next_cluster;
    queue.clear();
    queue.push_back(seed);
    while (!queue.empty()) {
      const SampleId p = queue.front();
      queue.pop_front();
      if (!core[p]) continue;  // border points are claimed but never expanded
      for (const SampleId q : neighbors[p]) {
        if (assignment[q] == kUnvisited) {
          assignment[q] = next_cluster;
          queue.push_back(q);
        }
      }
    }
    ++next_cluster;
  }
  for (std::size_t p = 0; p < n; ++p)
    if (assignment[p] == kUnvisited) assignment[p] = kOutlier;

  return pack_assignment(std::move(assignment));
}

// The pseudo label generator: k-reciprocal Jaccard distances over the memory
// features, then DBSCAN.
inline PseudoLabeling generate_pseudo_labels(const FeatureMatrix& memory, std::size_t k,
                                             const DbscanConfig& cfg) {
  const DistanceMatrix base = base_distances(memory);
  const DistanceMatrix jaccard =
      jaccard_matrix(expand_reciprocal(k_reciprocal(knn(base, k))));
  return dbscan(jaccard, cfg);
}

}  // namespace gsamp
