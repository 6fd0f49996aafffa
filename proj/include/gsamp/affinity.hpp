#pragma once

// Pairwise distances and the k-reciprocal / Jaccard machinery that turns a
// unit-norm feature matrix into the distance matrix the clusterer consumes.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "gsamp/core.hpp"

namespace gsamp {

// Dense symmetric n x n distance matrix with zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  std::size_t n() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    d_[i * n_ + j] = v;
    d_[j * n_ + i] = v;
  }

  const std::vector<double>& data() const { return d_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

// Per-sample neighborhood structures at a fixed k. `lists` are the ordered
// k-nearest lists; `reciprocal` holds the (expanded) reciprocal sets as
// sorted id vectors. Stages fill the fields progressively.
struct NeighborSets {
  std::size_t k = 0;
  std::vector<std::vector<SampleId>> lists;
  std::vector<std::vector<SampleId>> reciprocal;

  std::size_t n() const { return lists.size(); }
};

// entry(i,j) = 1 - <v_i, v_j> on unit rows; bounded by [0, 2].
inline DistanceMatrix base_distances(const FeatureMatrix& f) {
  validate_matrix(f);
  if (!f.unit_rows()) raise(Errc::NotNormalized, "base_distances requires unit rows");
  const std::size_t n = f.n();
  DistanceMatrix dm(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dm.set(i, j, 1.0 - dot(f.row(i), f.row(j)));
    }
  }
  return dm;
}

// Ordered min(k, n-1) nearest neighbors per sample, ascending distance,
// ties broken by smaller sample id.
inline NeighborSets knn(const DistanceMatrix& dm, std::size_t k) {
  const std::size_t n = dm.n();
  NeighborSets ns;
  ns.k = k;
  ns.lists.resize(n);
  std::vector<SampleId> order;
  for (std::size_t p = 0; p < n; ++p) {
    order.clear();
    for (std::size_t q = 0; q < n; ++q)
      if (q != p) order.push_back(q);
    const std::size_t take = std::min(k, n > 0 ? n - 1 : 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), [&](SampleId a, SampleId b) {
                        const double da = dm.at(p, a), db = dm.at(p, b);
                        if (da != db) return da < db;
                        return a < b;
                      });
    ns.lists[p].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return ns;
}

namespace detail {

// True if q appears in the first `depth` entries of p's ordered list.
inline bool within_prefix(const std::vector<SampleId>& list, std::size_t depth, SampleId q) {
  const std::size_t m = std::min(depth, list.size());
  for (std::size_t i = 0; i < m; ++i)
    if (list[i] == q) return true;
  return false;
}

// Reciprocal sets at a given prefix depth of the ordered lists; sorted output.
inline std::vector<std::vector<SampleId>> reciprocal_at(
    const std::vector<std::vector<SampleId>>& lists, std::size_t depth) {
  const std::size_t n = lists.size();
  std::vector<std::vector<SampleId>> recips(n);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t m = std::min(depth, lists[p].size());
    for (std::size_t i = 0; i < m; ++i) {
      const SampleId q = lists[p][i];
      if (within_prefix(lists[q], depth, p)) recips[p].push_back(q);
    }
    std::sort(recips[p].begin(), recips[p].end());
  }
  return recips;
}

}  // namespace detail

// R(p,k) = { q in N(p,k) : p in N(q,k) }.
inline NeighborSets k_reciprocal(NeighborSets ns) {
  ns.reciprocal = detail::reciprocal_at(ns.lists, ns.k);
  return ns;
}

// Expands each reciprocal set with the half-k reciprocal sets of members that
// overlap it by at least two thirds:
//   R*(p) = R(p,k)  union  { R(q, ceil(k/2)) : q in R(p,k),
//                            3*|R(p,k) ∩ R(q, ceil(k/2))| >= 2*|R(q, ceil(k/2))| }
inline NeighborSets expand_reciprocal(NeighborSets ns) {
  const std::size_t half = (ns.k + 1) / 2;
  const auto half_recips = detail::reciprocal_at(ns.lists, half);
  std::vector<std::vector<SampleId>> expanded(ns.n());
  std::vector<SampleId> merged, tmp;
  for (std::size_t p = 0; p < ns.n(); ++p) {
    merged = ns.reciprocal[p];
    for (const SampleId q : ns.reciprocal[p]) {
      const auto& candidate = half_recips[q];
      tmp.clear();
      std::set_intersection(ns.reciprocal[p].begin(), ns.reciprocal[p].end(),
                            candidate.begin(), candidate.end(), std::back_inserter(tmp));
      if (3 * tmp.size() >= 2 * candidate.size()) {
        tmp.clear();
        std::set_union(merged.begin(), merged.end(), candidate.begin(), candidate.end(),
                       std::back_inserter(tmp));
        merged.swap(tmp);
      }
    }
    expanded[p] = merged;
  }
  ns.reciprocal = std::move(expanded);
  return ns;
}

// Jaccard distance between self-inclusive expanded sets:
// with Rh(p) = R*(p) ∪ {p}, entry(p,q) = 1 - |Rh(p) ∩ Rh(q)| / |Rh(p) ∪ Rh(q)|.
inline DistanceMatrix jaccard_matrix(const NeighborSets& expanded) {
  const std::size_t n = expanded.n();
  std::vector<std::vector<SampleId>> hats(n);
  for (std::size_t p = 0; p < n; ++p) {
    auto& h = hats[p];
    h = expanded.reciprocal[p];
    const auto pos = std::lower_bound(h.begin(), h.end(), p);
    if (pos == h.end() || *pos != p) h.insert(pos, p);
  }
  DistanceMatrix dm(n);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      std::size_t inter = 0;
      const auto& a = hats[p];
      const auto& b = hats[q];
      std::size_t i = 0, j = 0;
      while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
          ++inter;
          ++i;
          ++j;
        } else if (a[i] < b[j]) {
          ++i;
        } else {
          ++j;
        }
      }
      const std::size_t uni = a.size() + b.size() - inter;
      dm.set(p, q, 1.0 - static_cast<double>(inter) / static_cast<double>(uni));
    }
  }
  return dm;
}

}  // namespace gsamp
