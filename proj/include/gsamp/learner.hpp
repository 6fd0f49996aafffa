#pragma once

// Linear encoder, memory-bank contrastive loss and the training loops.
// The loss pulls each encoded feature toward the unit centroid of its pseudo
// cluster against all other centroids; the memory bank blends stored and
// fresh features with momentum and is re-normalized after every update.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsamp/clustering.hpp"
#include "gsamp/core.hpp"
#include "gsamp/metrics.hpp"
#include "gsamp/sampling.hpp"
#include "gsamp/synth.hpp"

namespace gsamp {

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

// Shared linear map + bias over fixed observation vectors; the encoded
// feature is the unit-normalized affine image.
struct EncoderParams {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weight;  // out_dim x in_dim, row-major
  std::vector<double> bias;    // out_dim
};

inline EncoderParams random_encoder(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  EncoderParams p;
  p.in_dim = in_dim;
  p.out_dim = out_dim;
  p.weight.resize(out_dim * in_dim);
  p.bias.assign(out_dim, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& w : p.weight) w = scale * gaussian(rng);
  return p;
}

// v = normalize(W o + b)
inline std::vector<double> encode(const EncoderParams& p, std::span<const double> obs) {
  if (obs.size() != p.in_dim) raise(Errc::ShapeMismatch, "encode: observation dim mismatch");
  std::vector<double> z(p.out_dim);
  for (std::size_t r = 0; r < p.out_dim; ++r) {
    double acc = p.bias[r];
    const double* w = p.weight.data() + r * p.in_dim;
    for (std::size_t c = 0; c < p.in_dim; ++c) acc += w[c] * obs[c];
    z[r] = acc;
  }
  normalize_in_place(z);
  return z;
}

struct ParamGrads {
  std::vector<double> weight;
  std::vector<double> bias;
};

// Chain rule through encode: with z = W o + b and v = z / ||z||,
//   g_z = (I - v v^T) g_v / ||z||,  grad_W = g_z o^T,  grad_b = g_z.
inline ParamGrads backprop_params(const EncoderParams& p, std::span<const double> obs,
                                  std::span<const double> v, std::span<const double> g_v) {
  if (obs.size() != p.in_dim || v.size() != p.out_dim || g_v.size() != p.out_dim)
    raise(Errc::ShapeMismatch, "backprop_params: dim mismatch");
  double znorm_sq = 0.0;
  for (std::size_t r = 0; r < p.out_dim; ++r) {
    double acc = p.bias[r];
    const double* w = p.weight.data() + r * p.in_dim;
    for (std::size_t c = 0; c < p.in_dim; ++c) acc += w[c] * obs[c];
    znorm_sq += acc * acc;
  }
  const double znorm = std::sqrt(znorm_sq);
  if (znorm < kZeroNormFloor) raise(Errc::ZeroNorm, "backprop_params: pre-normalization norm ~ 0");

  const double vg = dot(v, g_v);
  ParamGrads g;
  g.bias.resize(p.out_dim);
  for (std::size_t r = 0; r < p.out_dim; ++r) g.bias[r] = (g_v[r] - v[r] * vg) / znorm;
  g.weight.resize(p.out_dim * p.in_dim);
  for (std::size_t r = 0; r < p.out_dim; ++r)
    for (std::size_t c = 0; c < p.in_dim; ++c) g.weight[r * p.in_dim + c] = g.bias[r] * obs[c];
  return g;
}

inline void sgd_step(EncoderParams& p, const ParamGrads& grads, double lr) {
  if (grads.weight.size() != p.weight.size() || grads.bias.size() != p.bias.size())
    raise(Errc::ShapeMismatch, "sgd_step: gradient shape mismatch");
  for (std::size_t i = 0; i < p.weight.size(); ++i) p.weight[i] -= lr * grads.weight[i];
  for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= lr * grads.bias[i];
}

// ---------------------------------------------------------------------------
// Memory bank
// ---------------------------------------------------------------------------

struct MemoryBank {
  FeatureMatrix rows;      // n x out_dim, unit rows
  double momentum = 0.2;
};

// row <- normalize(m * row + (1 - m) * v). The end points m=1 and m=0 are
// exact fixed points (row kept / row replaced) rather than renormalized.
inline void memory_update(MemoryBank& mem, SampleId id, std::span<const double> v) {
  if (v.size() != mem.rows.dim()) raise(Errc::ShapeMismatch, "memory_update: dim mismatch");
  if (mem.momentum == 1.0) return;
  auto row = mem.rows.row(id);
  if (mem.momentum == 0.0) {
    std::copy(v.begin(), v.end(), row.begin());
    return;
  }
  for (std::size_t d = 0; d < row.size(); ++d)
    row[d] = mem.momentum * row[d] + (1.0 - mem.momentum) * v[d];
  normalize_in_place(row);
}

// ---------------------------------------------------------------------------
// Centroids and contrastive loss
// ---------------------------------------------------------------------------

enum class LossMode {
  kClustersOnly,
  kClustersPlusOutliers,
};

// Unit centroids per cluster (normalized memory means) plus, in
// kClustersPlusOutliers mode, one singleton centroid per outlier holding its
// memory row. Cluster sums are cached so a memory update refreshes the
// affected centroid in O(dim). Degenerate clusters (mean norm ~ 0) are
// flagged inactive and drop out of the loss denominator.
class CentroidSet {
 public:
  CentroidSet() = default;

  CentroidSet(const MemoryBank& mem, const PseudoLabeling& labels, LossMode mode)
      : mode_(mode),
        dim_(mem.rows.dim()),
        num_cluster_(labels.num_clusters()),
        cluster_sizes_(labels.num_clusters()) {
    const std::size_t extra = mode == LossMode::kClustersPlusOutliers ? labels.outliers.size() : 0;
    centroids_ = FeatureMatrix(num_cluster_ + extra, dim_, false);
    active_.assign(num_cluster_ + extra, true);
    sums_.assign(num_cluster_ * dim_, 0.0);
    target_index_.assign(labels.size(), kNone);

    for (std::size_t c = 0; c < num_cluster_; ++c) {
      cluster_sizes_[c] = labels.clusters[c].size();
      double* sum = sums_.data() + c * dim_;
      for (const SampleId s : labels.clusters[c]) {
        const auto row = mem.rows.row(s);
        for (std::size_t d = 0; d < dim_; ++d) sum[d] += row[d];
        target_index_[s] = c;
      }
      refresh_cluster(c);
    }
    if (mode == LossMode::kClustersPlusOutliers) {
      for (std::size_t i = 0; i < labels.outliers.size(); ++i) {
        const SampleId s = labels.outliers[i];
        centroids_.set_row(num_cluster_ + i, mem.rows.row(s));
        target_index_[s] = num_cluster_ + i;
      }
    }
  }

  LossMode mode() const { return mode_; }
  std::size_t size() const { return centroids_.n(); }
  std::size_t num_clusters() const { return num_cluster_; }
  std::size_t dim() const { return dim_; }
  bool active(std::size_t idx) const { return active_[idx]; }
  std::span<const double> centroid(std::size_t idx) const { return centroids_.row(idx); }

  // Centroid index serving as the sample's positive, or nullopt when the
  // sample has no target (outlier under kClustersOnly, or degenerate cluster).
  std::optional<std::size_t> target_of(SampleId s) const {
    const std::size_t idx = target_index_[s];
    if (idx == kNone || !active_[idx]) return std::nullopt;
    return idx;
  }

  // Applies the effect of one memory-row change on the owning centroid.
  void apply_memory_delta(SampleId s, std::span<const double> old_row,
                          std::span<const double> new_row) {
    const std::size_t idx = target_index_[s];
    if (idx == kNone) return;
    if (idx < num_cluster_) {
      double* sum = sums_.data() + idx * dim_;
      for (std::size_t d = 0; d < dim_; ++d) sum[d] += new_row[d] - old_row[d];
      refresh_cluster(idx);
    } else {
      centroids_.set_row(idx, new_row);
    }
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  void refresh_cluster(std::size_t c) {
    const double* sum = sums_.data() + c * dim_;
    auto row = centroids_.row(c);
    const double inv = 1.0 / static_cast<double>(cluster_sizes_[c]);
    double norm_sq = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      row[d] = sum[d] * inv;
      norm_sq += row[d] * row[d];
    }
    const double norm = std::sqrt(norm_sq);
    if (norm < kZeroNormFloor) {
      active_[c] = false;
      return;
    }
    active_[c] = true;
    for (std::size_t d = 0; d < dim_; ++d) row[d] /= norm;
  }

  LossMode mode_ = LossMode::kClustersPlusOutliers;
  std::size_t dim_ = 0;
  std::size_t num_cluster_ = 0;
  std::vector<std::size_t> cluster_sizes_;
  FeatureMatrix centroids_;
  std::vector<bool> active_;
  std::vector<double> sums_;            // per-cluster running sums
  std::vector<std::size_t> target_index_;
};

namespace detail {

// Softmax over active centroids with max-logit subtraction. Returns the
// probabilities aligned with centroid indices (inactive entries stay 0).
inline std::vector<double> centroid_softmax(std::span<const double> v, const CentroidSet& cs,
                                            double tau) {
  std::vector<double> logits(cs.size(), 0.0);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cs.size(); ++k) {
    if (!cs.active(k)) continue;
    logits[k] = dot(v, cs.centroid(k)) / tau;
    max_logit = std::max(max_logit, logits[k]);
  }
  double denom = 0.0;
  std::vector<double> probs(cs.size(), 0.0);
  for (std::size_t k = 0; k < cs.size(); ++k) {
    if (!cs.active(k)) continue;
    probs[k] = std::exp(logits[k] - max_logit);
    denom += probs[k];
  }
  for (double& p : probs) p /= denom;
  return probs;
}

}  // namespace detail

// L = -log( exp(<v,c+>/tau) / sum_k exp(<v,c_k>/tau) ), the sum running over
// all active centroids (clusters, plus outlier singletons in
// kClustersPlusOutliers mode).
inline double contrastive_loss(std::span<const double> v, std::size_t target,
                               const CentroidSet& cs, double tau) {
  if (!(tau > 0.0)) raise(Errc::ConfigError, "train.tau: must be > 0");
  if (target >= cs.size() || !cs.active(target))
    raise(Errc::NoTarget, "contrastive_loss: target has no active centroid");
  const auto probs = detail::centroid_softmax(v, cs, tau);
  // -log p_target, clamped away from log(0) by construction (p_target > 0).
  return -std::log(probs[target]);
}

// dL/dv = (1/tau) (sum_k p_k c_k - c+)
inline std::vector<double> loss_gradient_feature(std::span<const double> v, std::size_t target,
                                                 const CentroidSet& cs, double tau) {
  if (!(tau > 0.0)) raise(Errc::ConfigError, "train.tau: must be > 0");
  if (target >= cs.size() || !cs.active(target))
    raise(Errc::NoTarget, "loss_gradient_feature: target has no active centroid");
  const auto probs = detail::centroid_softmax(v, cs, tau);
  std::vector<double> g(v.size(), 0.0);
  for (std::size_t k = 0; k < cs.size(); ++k) {
    if (!cs.active(k)) continue;
    const auto c = cs.centroid(k);
    for (std::size_t d = 0; d < g.size(); ++d) g[d] += probs[k] * c[d];
  }
  const auto pos = cs.centroid(target);
  for (std::size_t d = 0; d < g.size(); ++d) g[d] = (g[d] - pos[d]) / tau;
  return g;
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

struct SamplerConfig {
  enum class Kind { kGroup, kRandom, kBlock, kPk };
  Kind kind = Kind::kGroup;
  std::size_t group_size = 64;             // N
  std::size_t shuffle_degree = 1;          // M; kShuffleAll reshuffles everything
  std::size_t clusters_per_batch = 16;     // P
  std::size_t instances_per_cluster = 4;   // K
};

struct TrainConfig {
  double tau = 0.05;
  double momentum = 0.2;
  double lr = 0.00035;
  std::size_t lr_decay = 20;    // divide lr by 10 after every lr_decay epochs
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  std::size_t feature_dim = 16;  // encoder output dim
  LossMode loss_mode = LossMode::kClustersPlusOutliers;
  SamplerConfig sampler;
  std::size_t affinity_k = 30;
  DbscanConfig dbscan;
  bool eval_retrieval = true;
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.tau > 0.0)) raise(Errc::ConfigError, "train.tau: must be > 0");
  if (cfg.momentum < 0.0 || cfg.momentum > 1.0)
    raise(Errc::ConfigError, "train.momentum: must be in [0, 1]");
  if (!(cfg.lr > 0.0)) raise(Errc::ConfigError, "train.lr: must be > 0");
  if (cfg.lr_decay < 1) raise(Errc::ConfigError, "train.lr_decay: must be >= 1");
  if (cfg.batch_size < 1) raise(Errc::ConfigError, "train.batch_size: must be >= 1");
  if (cfg.feature_dim < 1) raise(Errc::ConfigError, "train.feature_dim: must be >= 1");
  if (cfg.affinity_k < 1) raise(Errc::ConfigError, "affinity.k: must be >= 1");
  if (cfg.sampler.group_size < 1) raise(Errc::ConfigError, "sampler.N: must be >= 1");
  if (cfg.sampler.clusters_per_batch < 1) raise(Errc::ConfigError, "sampler.P: must be >= 1");
  if (cfg.sampler.instances_per_cluster < 1) raise(Errc::ConfigError, "sampler.K: must be >= 1");
  validate_dbscan_config(cfg.dbscan);
}

// Encoder params + memory bank + per-epoch centroid cache.
struct TrainState {
  EncoderParams params;
  MemoryBank memory;
  CentroidSet centroids;
  std::size_t epoch = 0;
};

// One pass over the schedule. Per batch: encode members with the current
// params, average parameter gradients over members that have a target, take
// one SGD step, then apply the memory updates (in schedule order) and refresh
// the affected centroids. Returns the mean loss over contributing samples,
// NaN when nothing contributed.
inline double train_epoch(TrainState& state, const PseudoLabeling& labels,
                          const Schedule& schedule, const TrainConfig& cfg, double lr,
                          const FeatureMatrix& observations) {
  if (labels.size() != state.memory.rows.n())
    raise(Errc::ShapeMismatch, "train_epoch: labels and memory bank lengths differ");
  double total_loss = 0.0;
  std::size_t total_count = 0;
  std::vector<std::vector<double>> encoded;
  std::vector<double> old_row(state.memory.rows.dim());

  for (const auto& batch : batches(schedule, cfg.batch_size)) {
    encoded.clear();
    encoded.reserve(batch.size());
    for (const SampleId id : batch) encoded.push_back(encode(state.params, observations.row(id)));

    ParamGrads grads;
    grads.weight.assign(state.params.weight.size(), 0.0);
    grads.bias.assign(state.params.bias.size(), 0.0);
    std::size_t batch_count = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto target = state.centroids.target_of(batch[i]);
      if (!target) continue;
      const auto& v = encoded[i];
      total_loss += contrastive_loss(v, *target, state.centroids, cfg.tau);
      const auto g_v = loss_gradient_feature(v, *target, state.centroids, cfg.tau);
      const auto pg = backprop_params(state.params, observations.row(batch[i]), v, g_v);
      for (std::size_t j = 0; j < grads.weight.size(); ++j) grads.weight[j] += pg.weight[j];
      for (std::size_t j = 0; j < grads.bias.size(); ++j) grads.bias[j] += pg.bias[j];
      ++batch_count;
      ++total_count;
    }
    if (batch_count > 0) {
      const double inv = 1.0 / static_cast<double>(batch_count);
      for (double& g : grads.weight) g *= inv;
      for (double& g : grads.bias) g *= inv;
      sgd_step(state.params, grads, lr);
    }

    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto row = state.memory.rows.row(batch[i]);
      std::copy(row.begin(), row.end(), old_row.begin());
      memory_update(state.memory, batch[i], encoded[i]);
      state.centroids.apply_memory_delta(batch[i], old_row, state.memory.rows.row(batch[i]));
    }
  }
  return total_count > 0 ? total_loss / static_cast<double>(total_count)
                         : std::numeric_limits<double>::quiet_NaN();
}

struct TrainResult {
  TrainState state;
  std::vector<EpochMetrics> history;
  // Feature snapshot that produced the final epoch's pseudo labels; this is
  // what a run dumps so external evaluation reproduces the final row.
  FeatureMatrix clustered_features;
  PseudoLabeling final_labels;
};

namespace detail {

inline Schedule build_schedule(const SamplerConfig& sc, const PseudoLabeling& labels,
                               std::size_t batch_size, Rng& rng) {
  switch (sc.kind) {
    case SamplerConfig::Kind::kRandom:
      return random_schedule(labels.size(), rng);
    case SamplerConfig::Kind::kBlock: {
      const Schedule base = group_schedule(labels, sc.group_size, batch_size, rng);
      return block_shuffle(base, sc.shuffle_degree, batch_size, rng);
    }
    case SamplerConfig::Kind::kPk:
      return pk_schedule(labels, sc.clusters_per_batch, sc.instances_per_cluster, rng);
    case SamplerConfig::Kind::kGroup:
    default:
      return group_schedule(labels, sc.group_size, batch_size, rng);
  }
}

}  // namespace detail

// Full self-training loop: initialize the memory bank by encoding every
// sample, then per epoch regenerate pseudo labels from the memory, build the
// schedule, train, and record analytics. The learning rate is divided by 10
// after every cfg.lr_decay epochs.
inline TrainResult run_training(const Dataset& dataset, const TrainConfig& cfg, Rng& rng) {
  validate_train_config(cfg);
  validate_matrix(dataset.observations);
  const std::size_t n = dataset.observations.n();
  if (dataset.gt.size() != n) raise(Errc::ShapeMismatch, "dataset ground truth length mismatch");

  TrainResult result;
  TrainState& state = result.state;
  state.params = random_encoder(dataset.observations.dim(), cfg.feature_dim, rng);
  state.memory.momentum = cfg.momentum;
  state.memory.rows = FeatureMatrix(n, cfg.feature_dim, true);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = encode(state.params, dataset.observations.row(i));
    state.memory.rows.set_row(i, v);
  }

  std::vector<bool> prev_correct;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    state.epoch = epoch;
    const double lr = cfg.lr / std::pow(10.0, static_cast<double>(epoch / cfg.lr_decay));

    result.clustered_features = quantize_file_precision(state.memory.rows);
    const PseudoLabeling labels =
        generate_pseudo_labels(result.clustered_features, cfg.affinity_k, cfg.dbscan);

    const std::uint64_t epoch_seed = rng();
    Rng epoch_rng(epoch_seed);

    double mean_loss = std::numeric_limits<double>::quiet_NaN();
    const bool pk_short = cfg.sampler.kind == SamplerConfig::Kind::kPk &&
                          labels.num_clusters() < cfg.sampler.clusters_per_batch;
    const bool skip = (labels.num_clusters() == 0 &&
                       cfg.loss_mode == LossMode::kClustersOnly) ||
                      pk_short;
    if (!skip) {
      Schedule schedule =
          detail::build_schedule(cfg.sampler, labels, cfg.batch_size, epoch_rng);
      schedule.epoch_seed = epoch_seed;
      state.centroids = CentroidSet(state.memory, labels, cfg.loss_mode);
      mean_loss = train_epoch(state, labels, schedule, cfg, lr, dataset.observations);
    }

    EpochMetrics row;
    row.epoch = epoch;
    row.num_clusters = labels.num_clusters();
    row.num_outliers = labels.outliers.size();
    row.nmi = nmi(labels, dataset.gt);
    if (labels.num_clusters() > 0) {
      row.purity = purity(labels, dataset.gt);
      row.chaos = chaos(labels, dataset.gt);
      const VariancePair vp = variances(result.clustered_features, labels);
      row.intra_var = vp.intra;
      row.inter_var = vp.inter;
    }
    const std::vector<bool> correct = correctness(labels, dataset.gt);
    if (epoch > 0) {
      const TransitionRates tr = correction_misleading(prev_correct, correct);
      row.correction_rate = tr.correction;
      row.misleading_rate = tr.misleading;
    }
    prev_correct = correct;
    row.mean_loss = mean_loss;

    if (cfg.eval_retrieval) {
      std::size_t num_queries = 0;
      for (const bool q : dataset.query_mask)
        if (q) ++num_queries;
      if (num_queries > 0 && num_queries < n) {
        FeatureMatrix fresh(n, cfg.feature_dim, true);
        for (std::size_t i = 0; i < n; ++i)
          fresh.set_row(i, encode(state.params, dataset.observations.row(i)));
        FeatureMatrix qf(num_queries, cfg.feature_dim, true);
        FeatureMatrix gf(n - num_queries, cfg.feature_dim, true);
        GroundTruth qgt, ggt;
        std::size_t qi = 0, gi = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (dataset.query_mask[i]) {
            qf.set_row(qi++, fresh.row(i));
            qgt.identity.push_back(dataset.gt.identity[i]);
            qgt.camera.push_back(dataset.gt.camera[i]);
          } else {
            gf.set_row(gi++, fresh.row(i));
            ggt.identity.push_back(dataset.gt.identity[i]);
            ggt.camera.push_back(dataset.gt.camera[i]);
          }
        }
        const RetrievalScores rs = retrieval_eval(qf, qgt, gf, ggt);
        row.map = rs.map;
        row.top1 = rs.top1;
        row.top5 = rs.top5;
        row.top10 = rs.top10;
      }
    }

    result.history.push_back(row);
    result.final_labels = labels;
  }
  state.epoch = cfg.epochs;
  return result;
}

}  // namespace gsamp
