#include <catch2/catch_amalgamated.hpp>

#include "gsamp/learner.hpp"
#include "oracles.hpp"

using namespace gsamp;

namespace {

// MemoryBank with explicit rows.
MemoryBank bank_from_rows(const std::vector<std::vector<double>>& rows, double momentum) {
  MemoryBank mem;
  mem.momentum = momentum;
  mem.rows = FeatureMatrix(rows.size(), rows[0].size(), true);
  for (std::size_t i = 0; i < rows.size(); ++i) mem.rows.set_row(i, rows[i]);
  return mem;
}

PseudoLabeling trivial_clusters(const std::vector<std::vector<SampleId>>& clusters,
                                std::size_t n) {
  PseudoLabeling labels;
  labels.assignment.assign(n, kOutlier);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (const SampleId s : clusters[c]) labels.assignment[s] = static_cast<std::int32_t>(c);
    labels.clusters.push_back(clusters[c]);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (labels.assignment[i] == kOutlier) labels.outliers.push_back(i);
  return labels;
}

std::vector<double> random_unit(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  for (double& x : v) x = gaussian(rng);
  normalize_in_place(v);
  return v;
}

}  // namespace

TEST_CASE("encode basics") {
  EncoderParams p;
  p.in_dim = 3;
  p.out_dim = 3;
  p.weight = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  p.bias = {0, 0, 0};
  const std::vector<double> o = {0, 1, 0};
  CHECK(encode(p, o) == o);

  // Positive scaling of W and b cancels in the normalization.
  EncoderParams scaled = p;
  for (double& w : scaled.weight) w *= 7.5;
  CHECK(encode(scaled, o) == encode(p, o));

  EncoderParams zero;
  zero.in_dim = 3;
  zero.out_dim = 2;
  zero.weight.assign(6, 0.0);
  zero.bias.assign(2, 0.0);
  CHECK_THROWS_AS(encode(zero, o), Error);
}

TEST_CASE("centroids: means, singleton outliers, degenerate flag") {
  const auto mem = bank_from_rows({{1, 0}, {1, 0}, {0, 1}, {1, 0}, {-1, 0}}, 0.2);

  // Cluster of two identical rows -> that row.
  auto labels = trivial_clusters({{0, 1}}, 5);
  CentroidSet cs(mem, labels, LossMode::kClustersPlusOutliers);
  CHECK(cs.centroid(0)[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(cs.size() == 1 + 3);  // one cluster + three outlier singletons

  // Orthogonal rows u, w -> (u + w)/sqrt(2).
  labels = trivial_clusters({{0, 2}}, 5);
  CentroidSet ortho(mem, labels, LossMode::kClustersOnly);
  CHECK(ortho.centroid(0)[0] == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-12));
  CHECK(ortho.centroid(0)[1] == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-12));
  CHECK(ortho.size() == 1);  // outliers carry no centroid in this mode

  // Antipodal rows -> zero mean -> degenerate.
  labels = trivial_clusters({{3, 4}}, 5);
  CentroidSet degen(mem, labels, LossMode::kClustersOnly);
  CHECK_FALSE(degen.active(0));
  CHECK_FALSE(degen.target_of(3).has_value());
}

TEST_CASE("contrastive_loss analytic values") {
  const auto mem = bank_from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}}, 0.2);
  const std::vector<double> v = {1, 0};

  // K = 1: softmax over a single class.
  auto labels = trivial_clusters({{0, 1, 2, 3}}, 4);
  CentroidSet one(mem, labels, LossMode::kClustersOnly);
  CHECK(contrastive_loss(v, 0, one, 0.05) == Catch::Approx(0.0).margin(1e-9));

  // Orthogonal centroids, v at 45 degrees: equal logits -> ln K.
  labels = trivial_clusters({{0, 1}, {2, 3}}, 4);
  CentroidSet two(mem, labels, LossMode::kClustersOnly);
  const std::vector<double> mid = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
  CHECK(contrastive_loss(mid, 0, two, 0.05) == Catch::Approx(std::log(2.0)).margin(1e-9));
  CHECK(contrastive_loss(mid, 1, two, 0.05) == Catch::Approx(std::log(2.0)).margin(1e-9));

  // <v,c+> = 1, other similarity 0, tau = 0.05: ln(1 + e^-20).
  const double expected = std::log1p(std::exp(-20.0));
  CHECK(contrastive_loss(v, 0, two, 0.05) == Catch::Approx(expected).margin(1e-12));
  CHECK(contrastive_loss(v, 0, two, 0.05) == Catch::Approx(2.061e-9).margin(1e-12));
}

TEST_CASE("contrastive_loss throws NoTarget for outliers under clusters-only") {
  const auto mem = bank_from_rows({{1, 0}, {1, 0}, {0, 1}}, 0.2);
  const auto labels = trivial_clusters({{0, 1}}, 3);
  CentroidSet cs(mem, labels, LossMode::kClustersOnly);
  CHECK_FALSE(cs.target_of(2).has_value());
  CHECK_THROWS_AS(contrastive_loss(mem.rows.row(2), 1, cs, 0.05), Error);
}

TEST_CASE("loss probabilities sum to one") {
  Rng rng(3);
  const std::size_t dim = 6;
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 12; ++i) rows.push_back(random_unit(dim, rng));
  const auto mem = bank_from_rows(rows, 0.2);
  const auto labels = trivial_clusters({{0, 1, 2}, {3, 4}, {5, 6, 7}}, 12);
  CentroidSet cs(mem, labels, LossMode::kClustersPlusOutliers);
  // p_k sums to 1 implies L(target) = -log p_target consistent across targets:
  // sum_k exp(-L_k) = 1.
  const auto v = random_unit(dim, rng);
  double total = 0.0;
  for (std::size_t k = 0; k < cs.size(); ++k)
    total += std::exp(-contrastive_loss(v, k, cs, 0.05));
  CHECK(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("loss is invariant under a common rotation") {
  // Rotate v and every memory row by the same 2D rotation; the loss depends
  // only on inner products.
  const double theta = 0.83;
  const double c = std::cos(theta), s = std::sin(theta);
  const auto rot = [&](const std::vector<double>& v) {
    return std::vector<double>{c * v[0] - s * v[1], s * v[0] + c * v[1]};
  };
  const std::vector<std::vector<double>> rows = {{1, 0}, {0.6, 0.8}, {0, 1}, {-0.8, 0.6}};
  std::vector<std::vector<double>> rotated;
  for (const auto& r : rows) rotated.push_back(rot(r));

  const auto labels = trivial_clusters({{0, 1}, {2, 3}}, 4);
  CentroidSet cs(bank_from_rows(rows, 0.2), labels, LossMode::kClustersOnly);
  CentroidSet cs_rot(bank_from_rows(rotated, 0.2), labels, LossMode::kClustersOnly);
  const std::vector<double> v = {0.28, 0.96};
  CHECK(contrastive_loss(v, 0, cs, 0.05) ==
        Catch::Approx(contrastive_loss(rot(v), 0, cs_rot, 0.05)).epsilon(1e-12));
}

TEST_CASE("loss_gradient_feature analytic cases") {
  const auto mem = bank_from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}}, 0.2);

  // K = 1: gradient vanishes.
  auto labels = trivial_clusters({{0, 1, 2, 3}}, 4);
  CentroidSet one(mem, labels, LossMode::kClustersOnly);
  const std::vector<double> probe = {0.6, 0.8};
  for (const double g : loss_gradient_feature(probe, 0, one, 0.05))
    CHECK(g == Catch::Approx(0.0).margin(1e-12));

  // Equal logits, K = 2, target 0: (1/tau)((c0+c1)/2 - c0).
  labels = trivial_clusters({{0, 1}, {2, 3}}, 4);
  CentroidSet two(mem, labels, LossMode::kClustersOnly);
  const std::vector<double> mid = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
  const auto g = loss_gradient_feature(mid, 0, two, 0.05);
  CHECK(g[0] == Catch::Approx((0.5 - 1.0) / 0.05).margin(1e-9));
  CHECK(g[1] == Catch::Approx(0.5 / 0.05).margin(1e-9));
}

TEST_CASE("feature gradient matches central finite differences") {
  Rng rng(17);
  std::size_t checked = 0;
  while (checked < 120) {
    const std::size_t dim = uniform01(rng) < 0.5 ? 4 : 16;
    const std::size_t k = uniform01(rng) < 0.5 ? 2 : 10;
    const double tau = uniform01(rng) < 0.5 ? 0.05 : 0.2;

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < 2 * k; ++i) rows.push_back(random_unit(dim, rng));
    std::vector<std::vector<SampleId>> clusters;
    for (std::size_t c = 0; c < k; ++c) clusters.push_back({2 * c, 2 * c + 1});
    const auto labels = trivial_clusters(clusters, 2 * k);
    CentroidSet cs(bank_from_rows(rows, 0.2), labels, LossMode::kClustersOnly);

    std::vector<double> v = random_unit(dim, rng);
    const std::size_t target = uniform_below(rng, k);
    // Keep instances informative: skip saturated cases with ~zero gradient.
    if (contrastive_loss(v, target, cs, tau) < 1e-3) continue;

    const auto analytic = loss_gradient_feature(v, target, cs, tau);
    const double h = 1e-6;
    double num_norm = 0, diff_norm = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double numeric = oracle::central_difference(
          [&](double x) {
            auto vv = v;
            vv[d] = x;
            return contrastive_loss(vv, target, cs, tau);
          },
          v[d], h);
      num_norm += numeric * numeric;
      const double diff = numeric - analytic[d];
      diff_norm += diff * diff;
    }
    CHECK(std::sqrt(diff_norm) <= 1e-4 * std::max(1e-6, std::sqrt(num_norm)));
    ++checked;
  }
}

TEST_CASE("backprop projector properties") {
  Rng rng(23);
  EncoderParams p = random_encoder(8, 5, rng);
  const auto o = random_unit(8, rng);
  const auto v = encode(p, o);

  // <g_b, v> = 0 for any g_v (g_b equals g_z).
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> g_v(5);
    for (double& x : g_v) x = gaussian(rng);
    const auto g = backprop_params(p, o, v, g_v);
    CHECK(dot(g.bias, v) == Catch::Approx(0.0).margin(1e-12));
  }

  // g_v parallel to v -> zero parameter gradients.
  std::vector<double> parallel = v;
  for (double& x : parallel) x *= 3.7;
  const auto g = backprop_params(p, o, v, parallel);
  for (const double x : g.weight) CHECK(x == Catch::Approx(0.0).margin(1e-12));
  for (const double x : g.bias) CHECK(x == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("parameter gradients match finite differences of loss(encode)") {
  Rng rng(29);
  std::size_t checked = 0;
  while (checked < 100) {
    const std::size_t out_dim = uniform01(rng) < 0.5 ? 4 : 16;
    const std::size_t in_dim = 6;
    const std::size_t k = uniform01(rng) < 0.5 ? 2 : 10;
    const double tau = 0.2;

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < 2 * k; ++i) rows.push_back(random_unit(out_dim, rng));
    std::vector<std::vector<SampleId>> clusters;
    for (std::size_t c = 0; c < k; ++c) clusters.push_back({2 * c, 2 * c + 1});
    const auto labels = trivial_clusters(clusters, 2 * k);
    CentroidSet cs(bank_from_rows(rows, 0.2), labels, LossMode::kClustersOnly);

    EncoderParams p = random_encoder(in_dim, out_dim, rng);
    const auto o = random_unit(in_dim, rng);
    const std::size_t target = uniform_below(rng, k);
    const auto v = encode(p, o);
    if (contrastive_loss(v, target, cs, tau) < 1e-3) continue;

    const auto g_v = loss_gradient_feature(v, target, cs, tau);
    const auto analytic = backprop_params(p, o, v, g_v);

    const auto loss_at = [&](EncoderParams& params) {
      return contrastive_loss(encode(params, o), target, cs, tau);
    };
    const double h = 1e-6;
    double num_norm = 0, diff_norm = 0;
    for (std::size_t i = 0; i < p.weight.size(); ++i) {
      const double saved = p.weight[i];
      p.weight[i] = saved + h;
      const double up = loss_at(p);
      p.weight[i] = saved - h;
      const double down = loss_at(p);
      p.weight[i] = saved;
      const double numeric = (up - down) / (2 * h);
      num_norm += numeric * numeric;
      diff_norm += (numeric - analytic.weight[i]) * (numeric - analytic.weight[i]);
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      const double saved = p.bias[i];
      p.bias[i] = saved + h;
      const double up = loss_at(p);
      p.bias[i] = saved - h;
      const double down = loss_at(p);
      p.bias[i] = saved;
      const double numeric = (up - down) / (2 * h);
      num_norm += numeric * numeric;
      diff_norm += (numeric - analytic.bias[i]) * (numeric - analytic.bias[i]);
    }
    CHECK(std::sqrt(diff_norm) <= 1e-4 * std::max(1e-6, std::sqrt(num_norm)));
    ++checked;
  }
}

TEST_CASE("sgd_step linearity and fixed points") {
  Rng rng(31);
  EncoderParams p = random_encoder(4, 3, rng);
  ParamGrads g;
  g.weight.assign(p.weight.size(), 0.0);
  g.bias.assign(p.bias.size(), 0.0);
  for (double& x : g.weight) x = gaussian(rng);
  for (double& x : g.bias) x = gaussian(rng);

  EncoderParams zero_lr = p;
  sgd_step(zero_lr, g, 0.0);
  CHECK(zero_lr.weight == p.weight);

  EncoderParams zero_grad = p;
  ParamGrads zg;
  zg.weight.assign(p.weight.size(), 0.0);
  zg.bias.assign(p.bias.size(), 0.0);
  sgd_step(zero_grad, zg, 0.5);
  CHECK(zero_grad.weight == p.weight);

  EncoderParams full = p, halves = p;
  sgd_step(full, g, 0.2);
  sgd_step(halves, g, 0.1);
  sgd_step(halves, g, 0.1);
  for (std::size_t i = 0; i < p.weight.size(); ++i)
    CHECK(halves.weight[i] == Catch::Approx(full.weight[i]).margin(1e-15));
}

TEST_CASE("memory_update worked cases") {
  auto mem = bank_from_rows({{1, 0}}, 1.0);
  memory_update(mem, 0, std::vector<double>{0, 1});
  CHECK(mem.rows.row(0)[0] == 1.0);  // m = 1: exact fixed point

  mem = bank_from_rows({{1, 0}}, 0.0);
  memory_update(mem, 0, std::vector<double>{0, 1});
  CHECK(mem.rows.row(0)[1] == 1.0);  // m = 0: replaced

  mem = bank_from_rows({{1, 0}}, 0.2);
  memory_update(mem, 0, std::vector<double>{0, 1});
  CHECK(mem.rows.row(0)[0] == Catch::Approx(0.24254).margin(1e-5));
  CHECK(mem.rows.row(0)[1] == Catch::Approx(0.97014).margin(1e-5));

  // Antipodal blend at m = 0.5 cancels exactly.
  mem = bank_from_rows({{1, 0}}, 0.5);
  CHECK_THROWS_AS(memory_update(mem, 0, std::vector<double>{-1, 0}), Error);
}

TEST_CASE("memory rows stay unit-norm under many updates") {
  Rng rng(37);
  auto mem = bank_from_rows({random_unit(6, rng)}, 0.2);
  for (int i = 0; i < 500; ++i) {
    memory_update(mem, 0, random_unit(6, rng));
    CHECK(std::abs(l2_norm(mem.rows.row(0)) - 1.0) < 1e-12);
  }
}

TEST_CASE("train_epoch: lr=0 and m=1 leave the state unchanged") {
  Rng rng(41);
  SynthConfig scfg;
  scfg.num_identities = 6;
  scfg.samples_per_identity = 8;
  scfg.obs_dim = 8;
  scfg.num_cameras = 2;
  scfg.identity_noise = 0.1;
  scfg.camera_offset_scale = 0.0;
  scfg.query_fraction = 0.0;
  scfg.seed = 7;
  const Dataset ds = generate(scfg);

  TrainState state;
  state.params = random_encoder(8, 4, rng);
  state.memory.momentum = 1.0;
  state.memory.rows = FeatureMatrix(ds.observations.n(), 4, true);
  for (std::size_t i = 0; i < ds.observations.n(); ++i)
    state.memory.rows.set_row(i, encode(state.params, ds.observations.row(i)));

  const auto labels = generate_pseudo_labels(state.memory.rows, 10, {.eps = 0.6, .min_pts = 3});
  Rng sched_rng(1);
  const auto schedule = group_schedule(labels, 8, 16, sched_rng);
  state.centroids = CentroidSet(state.memory, labels, LossMode::kClustersPlusOutliers);

  TrainConfig cfg;
  cfg.batch_size = 16;
  const auto params_before = state.params.weight;
  const auto memory_before = state.memory.rows.data();
  const double loss = train_epoch(state, labels, schedule, cfg, 0.0, ds.observations);
  CHECK(std::isfinite(loss));
  CHECK(state.params.weight == params_before);
  CHECK(state.memory.rows.data() == memory_before);
}

TEST_CASE("train_epoch is bitwise deterministic") {
  SynthConfig scfg;
  scfg.num_identities = 5;
  scfg.samples_per_identity = 6;
  scfg.obs_dim = 8;
  scfg.num_cameras = 2;
  scfg.identity_noise = 0.2;
  scfg.camera_offset_scale = 0.1;
  scfg.query_fraction = 0.0;
  scfg.seed = 3;
  const Dataset ds = generate(scfg);

  const auto run_once = [&]() {
    Rng rng(11);
    TrainState state;
    state.params = random_encoder(8, 4, rng);
    state.memory.momentum = 0.2;
    state.memory.rows = FeatureMatrix(ds.observations.n(), 4, true);
    for (std::size_t i = 0; i < ds.observations.n(); ++i)
      state.memory.rows.set_row(i, encode(state.params, ds.observations.row(i)));
    const auto labels =
        generate_pseudo_labels(state.memory.rows, 10, {.eps = 0.6, .min_pts = 3});
    Rng sched_rng(2);
    const auto schedule = group_schedule(labels, 4, 8, sched_rng);
    state.centroids = CentroidSet(state.memory, labels, LossMode::kClustersPlusOutliers);
    TrainConfig cfg;
    cfg.batch_size = 8;
    const double loss = train_epoch(state, labels, schedule, cfg, 0.01, ds.observations);
    return std::make_pair(loss, state.memory.rows.data());
  };
  const auto a = run_once();
  const auto b = run_once();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("epoch-mean loss is non-increasing on separable data") {
  SynthConfig scfg;
  scfg.num_identities = 10;
  scfg.samples_per_identity = 6;
  scfg.obs_dim = 16;
  scfg.num_cameras = 2;
  scfg.identity_noise = 0.0;
  scfg.camera_offset_scale = 0.0;
  scfg.query_fraction = 0.0;
  scfg.seed = 5;
  const Dataset ds = generate(scfg);

  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.feature_dim = 8;
  cfg.affinity_k = 8;
  cfg.dbscan.min_pts = 3;
  cfg.lr = 0.05;
  cfg.eval_retrieval = false;
  Rng rng(13);
  const auto result = run_training(ds, cfg, rng);
  REQUIRE(result.history.size() == 5);
  for (std::size_t e = 1; e < 5; ++e)
    CHECK(result.history[e].mean_loss <= result.history[e - 1].mean_loss + 1e-9);
}

TEST_CASE("run_training with zero epochs returns empty history") {
  SynthConfig scfg;
  scfg.num_identities = 3;
  scfg.samples_per_identity = 4;
  scfg.obs_dim = 6;
  scfg.num_cameras = 2;
  scfg.seed = 1;
  const Dataset ds = generate(scfg);
  TrainConfig cfg;
  cfg.epochs = 0;
  Rng rng(1);
  const auto result = run_training(ds, cfg, rng);
  CHECK(result.history.empty());
  CHECK(result.state.memory.rows.n() == 12);
}

TEST_CASE("run_training is deterministic for a fixed seed") {
  SynthConfig scfg;
  scfg.num_identities = 6;
  scfg.samples_per_identity = 6;
  scfg.obs_dim = 8;
  scfg.num_cameras = 2;
  scfg.identity_noise = 0.25;
  scfg.camera_offset_scale = 0.15;
  scfg.query_fraction = 0.2;
  scfg.seed = 9;
  const Dataset ds = generate(scfg);

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.feature_dim = 4;
  cfg.affinity_k = 8;
  cfg.dbscan.min_pts = 3;
  const auto run_once = [&]() {
    Rng rng(19);
    return run_training(ds, cfg, rng);
  };
  const auto a = run_once();
  const auto b = run_once();
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].nmi == b.history[e].nmi);
    CHECK(a.history[e].mean_loss == b.history[e].mean_loss);
    CHECK(a.history[e].num_clusters == b.history[e].num_clusters);
  }
  CHECK(a.state.memory.rows.data() == b.state.memory.rows.data());
}
