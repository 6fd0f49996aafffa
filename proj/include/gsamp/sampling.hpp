#pragma once

// Batch schedulers. Each builds a flat ordered list of sample ids with group
// extents; batches() then slices the order blindly, so groups larger than the
// batch size span several batches. All shuffles are Fisher-Yates driven by the
// caller's generator, making every schedule a pure function of (inputs, seed).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsamp/clustering.hpp"
#include "gsamp/core.hpp"

namespace gsamp {

// A run of samples sharing one origin (cluster id or kOutlier).
struct Group {
  std::vector<SampleId> members;
  std::int32_t origin = kOutlier;
};

struct Schedule {
  std::vector<SampleId> order;
  std::vector<std::size_t> group_offsets;  // size num_groups()+1; group g = [g, g+1)
  std::string kind;
  std::uint64_t epoch_seed = 0;
  bool may_repeat = false;  // PK schedules may repeat ids

  std::size_t size() const { return order.size(); }
  std::size_t num_groups() const {
    return group_offsets.empty() ? 0 : group_offsets.size() - 1;
  }
  std::span<const SampleId> group(std::size_t g) const {
    return {order.data() + group_offsets[g], group_offsets[g + 1] - group_offsets[g]};
  }
};

namespace detail {

inline Schedule flatten(std::vector<Group> groups, std::string kind, bool may_repeat) {
  Schedule s;
  s.kind = std::move(kind);
  s.may_repeat = may_repeat;
  s.group_offsets.push_back(0);
  for (auto& g : groups) {
    s.order.insert(s.order.end(), g.members.begin(), g.members.end());
    s.group_offsets.push_back(s.order.size());
  }
  return s;
}

}  // namespace detail

// Group sampling: per cluster (clusters visited in shuffled order, members
// shuffled) consecutive groups of exactly `group_size` with the remainder
// packed as one final group; outliers shuffled and packed into groups of
// exactly `batch_size`; finally all groups are shuffled together.
inline Schedule group_schedule(const PseudoLabeling& labels, std::size_t group_size,
                               std::size_t batch_size, Rng& rng) {
  if (labels.size() == 0) raise(Errc::EmptyInput, "group_schedule: no samples");
  if (group_size < 1) raise(Errc::ConfigError, "sampler.N: must be >= 1");
  if (batch_size < 1) raise(Errc::ConfigError, "train.batch_size: must be >= 1");

  std::vector<std::size_t> cluster_order(labels.num_clusters());
  for (std::size_t i = 0; i < cluster_order.size(); ++i) cluster_order[i] = i;
  fisher_yates(cluster_order, rng);

  std::vector<Group> groups;
  std::vector<SampleId> members;
  for (const std::size_t ci : cluster_order) {
    members = labels.clusters[ci];
    fisher_yates(members, rng);
    std::size_t pos = 0;
    while (members.size() - pos > group_size) {
      Group g;
      g.origin = static_cast<std::int32_t>(ci);
      g.members.assign(members.begin() + static_cast<std::ptrdiff_t>(pos),
                       members.begin() + static_cast<std::ptrdiff_t>(pos + group_size));
      groups.push_back(std::move(g));
      pos += group_size;
    }
    if (pos < members.size()) {
      Group g;
      g.origin = static_cast<std::int32_t>(ci);
      g.members.assign(members.begin() + static_cast<std::ptrdiff_t>(pos), members.end());
      groups.push_back(std::move(g));
    }
  }

  members = labels.outliers;
  fisher_yates(members, rng);
  for (std::size_t pos = 0; pos < members.size(); pos += batch_size) {
    Group g;
    g.origin = kOutlier;
    const std::size_t end = std::min(pos + batch_size, members.size());
    g.members.assign(members.begin() + static_cast<std::ptrdiff_t>(pos),
                     members.begin() + static_cast<std::ptrdiff_t>(end));
    groups.push_back(std::move(g));
  }

  fisher_yates(groups, rng);
  Schedule s = detail::flatten(std::move(groups), "group", false);
  return s;
}

// Uniform random permutation of [0, n); one group spanning everything.
inline Schedule random_schedule(std::size_t n, Rng& rng) {
  if (n == 0) raise(Errc::EmptyInput, "random_schedule: no samples");
  Schedule s;
  s.kind = "random";
  s.order.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.order[i] = i;
  fisher_yates(s.order, rng);
  s.group_offsets = {0, n};
  return s;
}

// Shuffle degree: degree == kShuffleAll reshuffles the whole order.
inline constexpr std::size_t kShuffleAll = 0;

// Partitions base.order into consecutive blocks of degree*batch_size samples
// (last block shorter) and reshuffles uniformly within each block. Group
// structure is replaced by the blocks.
inline Schedule block_shuffle(const Schedule& base, std::size_t degree,
                              std::size_t batch_size, Rng& rng) {
  const std::size_t n = base.order.size();
  Schedule s;
  s.kind = "block";
  s.may_repeat = base.may_repeat;
  s.order = base.order;
  const std::size_t span =
      (degree == kShuffleAll) ? n : std::min(degree * batch_size, n);
  s.group_offsets.push_back(0);
  std::vector<SampleId> block;
  for (std::size_t pos = 0; pos < n; pos += span) {
    const std::size_t end = std::min(pos + span, n);
    block.assign(s.order.begin() + static_cast<std::ptrdiff_t>(pos),
                 s.order.begin() + static_cast<std::ptrdiff_t>(end));
    fisher_yates(block, rng);
    std::copy(block.begin(), block.end(),
              s.order.begin() + static_cast<std::ptrdiff_t>(pos));
    s.group_offsets.push_back(end);
  }
  return s;
}

// PK identity sampling: ceil(n / (P*K)) batches, each drawing P distinct
// clusters uniformly and K members per cluster (with replacement only when
// the cluster has fewer than K members). May repeat sample ids.
inline Schedule pk_schedule(const PseudoLabeling& labels, std::size_t clusters_per_batch,
                            std::size_t instances_per_cluster, Rng& rng) {
  if (labels.size() == 0) raise(Errc::EmptyInput, "pk_schedule: no samples");
  const std::size_t num_clusters = labels.num_clusters();
  if (num_clusters < clusters_per_batch)
    raise(Errc::TooFewClusters, "pk_schedule: " + std::to_string(num_clusters) +
                                    " clusters < P=" + std::to_string(clusters_per_batch));

  const std::size_t slot = clusters_per_batch * instances_per_cluster;
  const std::size_t num_batches = (labels.size() + slot - 1) / slot;

  std::vector<Group> groups;
  std::vector<std::size_t> cluster_ids(num_clusters);
  std::vector<SampleId> members;
  for (std::size_t b = 0; b < num_batches; ++b) {
    for (std::size_t i = 0; i < num_clusters; ++i) cluster_ids[i] = i;
    partial_fisher_yates(cluster_ids, clusters_per_batch, rng);
    for (std::size_t c = 0; c < clusters_per_batch; ++c) {
      const std::size_t ci = cluster_ids[c];
      const auto& pool = labels.clusters[ci];
      Group g;
      g.origin = static_cast<std::int32_t>(ci);
      if (pool.size() >= instances_per_cluster) {
        members = pool;
        partial_fisher_yates(members, instances_per_cluster, rng);
        g.members.assign(members.begin(),
                         members.begin() + static_cast<std::ptrdiff_t>(instances_per_cluster));
      } else {
        for (std::size_t i = 0; i < instances_per_cluster; ++i)
          g.members.push_back(pool[uniform_below(rng, pool.size())]);
      }
      groups.push_back(std::move(g));
    }
  }
  return detail::flatten(std::move(groups), "pk", true);
}

// Consecutive slices of length batch_size; the final partial batch is kept.
inline std::vector<std::vector<SampleId>> batches(const Schedule& s, std::size_t batch_size) {
  if (batch_size < 1) raise(Errc::ConfigError, "train.batch_size: must be >= 1");
  std::vector<std::vector<SampleId>> out;
  for (std::size_t pos = 0; pos < s.order.size(); pos += batch_size) {
    const std::size_t end = std::min(pos + batch_size, s.order.size());
    out.emplace_back(s.order.begin() + static_cast<std::ptrdiff_t>(pos),
                     s.order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace gsamp
