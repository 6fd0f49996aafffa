#pragma once

// Synthetic identity benchmark generation and feature/label file formats.
//
// Feature file: magic "FEAT", u32-LE n, u32-LE dim, then n*dim IEEE-754
// 32-bit LE values, row-major. Label file: UTF-8 CSV with header exactly
// `sample_id,identity,camera`.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gsamp/core.hpp"

namespace gsamp {

struct SynthConfig {
  std::size_t num_identities = 50;
  std::size_t samples_per_identity = 20;
  std::size_t obs_dim = 32;
  std::size_t num_cameras = 4;
  double identity_noise = 0.10;       // sigma_id
  double camera_offset_scale = 0.16;  // sigma_cam
  double query_fraction = 0.2;
  std::uint64_t seed = 0;
};

inline void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.num_identities < 1) raise(Errc::ConfigError, "synth.num_identities: must be >= 1");
  if (cfg.samples_per_identity < 1)
    raise(Errc::ConfigError, "synth.samples_per_identity: must be >= 1");
  if (cfg.obs_dim < 1) raise(Errc::ConfigError, "synth.obs_dim: must be >= 1");
  if (cfg.num_cameras < 1) raise(Errc::ConfigError, "synth.num_cameras: must be >= 1");
  if (cfg.identity_noise < 0.0) raise(Errc::ConfigError, "synth.identity_noise: must be >= 0");
  if (cfg.camera_offset_scale < 0.0)
    raise(Errc::ConfigError, "synth.camera_offset_scale: must be >= 0");
  if (cfg.query_fraction < 0.0 || cfg.query_fraction >= 1.0)
    raise(Errc::ConfigError, "synth.query_fraction: must be in [0, 1)");
}

struct Dataset {
  FeatureMatrix observations;  // unit rows, obs_dim
  GroundTruth gt;
  std::vector<bool> query_mask;
};

// Identity prototypes drawn uniformly on the unit sphere, per-camera offset
// vectors with scale sigma_cam, samples = normalize(mu + sigma_id*eps + delta).
// Cameras are assigned round-robin within each identity. The query mask holds
// ceil(query_fraction*n) samples, each covering a distinct (identity, camera)
// pair (capped at the number of pairs present).
inline Dataset generate(const SynthConfig& cfg) {
  validate_synth_config(cfg);
  Rng rng(cfg.seed);
  const std::size_t n = cfg.num_identities * cfg.samples_per_identity;
  const std::size_t dim = cfg.obs_dim;

  std::vector<std::vector<double>> prototypes(cfg.num_identities);
  for (auto& p : prototypes) {
    p.resize(dim);
    for (double& x : p) x = gaussian(rng);
    normalize_in_place(p);
  }
  // Offset direction is random; the magnitude is exactly sigma_cam * sqrt(dim).
  std::vector<std::vector<double>> offsets(cfg.num_cameras, std::vector<double>(dim, 0.0));
  for (auto& o : offsets) {
    if (cfg.camera_offset_scale == 0.0) continue;
    for (double& x : o) x = gaussian(rng);
    normalize_in_place(o);
    const double target_norm = cfg.camera_offset_scale * std::sqrt(static_cast<double>(dim));
    for (double& x : o) x *= target_norm;
  }

  Dataset ds;
  ds.observations = FeatureMatrix(n, dim, true);
  ds.gt.identity.resize(n);
  ds.gt.camera.resize(n);
  std::vector<double> obs(dim);
  for (std::size_t i = 0; i < cfg.num_identities; ++i) {
    for (std::size_t j = 0; j < cfg.samples_per_identity; ++j) {
      const std::size_t idx = i * cfg.samples_per_identity + j;
      const std::size_t cam = j % cfg.num_cameras;
      for (std::size_t d = 0; d < dim; ++d)
        obs[d] = prototypes[i][d] + cfg.identity_noise * gaussian(rng) + offsets[cam][d];
      normalize_in_place(obs);
      ds.observations.set_row(idx, obs);
      ds.gt.identity[idx] = static_cast<int>(i);
      ds.gt.camera[idx] = static_cast<int>(cam);
    }
  }

  ds.query_mask.assign(n, false);
  const auto want = static_cast<std::size_t>(
      std::ceil(cfg.query_fraction * static_cast<double>(n)));
  if (want > 0) {
    // Samples of each (identity, camera) pair, pairs visited in shuffled order.
    const std::size_t cams = std::min(cfg.num_cameras, cfg.samples_per_identity);
    std::vector<std::size_t> pair_order(cfg.num_identities * cams);
    for (std::size_t i = 0; i < pair_order.size(); ++i) pair_order[i] = i;
    fisher_yates(pair_order, rng);
    std::size_t marked = 0;
    std::vector<SampleId> bucket;
    for (const std::size_t pair : pair_order) {
      if (marked >= want) break;
      const std::size_t ident = pair / cams;
      const std::size_t cam = pair % cams;
      bucket.clear();
      for (std::size_t j = cam; j < cfg.samples_per_identity; j += cfg.num_cameras)
        bucket.push_back(ident * cfg.samples_per_identity + j);
      ds.query_mask[bucket[uniform_below(rng, bucket.size())]] = true;
      ++marked;
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Feature files
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32le(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) raise(Errc::IoError, "feature file truncated in header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void write_features(const std::string& path, const FeatureMatrix& f) {
  validate_matrix(f);
  if (f.n() > std::numeric_limits<std::uint32_t>::max() ||
      f.dim() > std::numeric_limits<std::uint32_t>::max())
    raise(Errc::ShapeOverflow, "feature file cannot hold n or dim above 2^32-1");
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(Errc::IoError, "cannot open for writing: " + path);
  os.write("FEAT", 4);
  detail::put_u32le(os, static_cast<std::uint32_t>(f.n()));
  detail::put_u32le(os, static_cast<std::uint32_t>(f.dim()));
  for (const double x : f.data()) {
    const float v = static_cast<float>(x);
    static_assert(sizeof(float) == 4);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    detail::put_u32le(os, bits);
  }
  if (!os) raise(Errc::IoError, "write failed: " + path);
}

inline FeatureMatrix read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(Errc::IoError, "cannot open for reading: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FEAT", 4) != 0)
    raise(Errc::BadMagic, "not a feature file: " + path);
  const std::uint32_t n = detail::get_u32le(is);
  const std::uint32_t dim = detail::get_u32le(is);
  if (n == 0 || dim == 0) raise(Errc::ShapeMismatch, "feature file declares an empty matrix");
  if (static_cast<std::uint64_t>(n) * dim >
      std::numeric_limits<std::size_t>::max() / sizeof(double))
    raise(Errc::ShapeOverflow, "feature file too large for this platform");

  FeatureMatrix f(n, dim, false);
  for (std::size_t i = 0; i < f.data().size(); ++i) {
    const std::uint32_t bits = detail::get_u32le(is);
    float v;
    std::memcpy(&v, &bits, 4);
    f.data()[i] = static_cast<double>(v);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Label files
// ---------------------------------------------------------------------------

inline constexpr const char* kLabelHeader = "sample_id,identity,camera";

inline void write_labels(const std::string& path, const GroundTruth& gt) {
  std::ofstream os(path);
  if (!os) raise(Errc::IoError, "cannot open for writing: " + path);
  os << kLabelHeader << "\n";
  for (std::size_t i = 0; i < gt.size(); ++i)
    os << i << "," << gt.identity[i] << "," << gt.camera[i] << "\n";
  if (!os) raise(Errc::IoError, "write failed: " + path);
}

inline GroundTruth read_labels(const std::string& path) {
  std::ifstream is(path);
  if (!is) raise(Errc::IoError, "cannot open for reading: " + path);
  std::string line;
  if (!std::getline(is, line)) raise(Errc::IoError, "empty label file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLabelHeader)
    raise(Errc::IoError, "label file header must be exactly `" + std::string(kLabelHeader) + "`");

  struct Row {
    std::size_t id;
    int identity;
    int camera;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      raise(Errc::MissingId, "label row " + std::to_string(lineno) + " is malformed");
    Row r{};
    try {
      r.id = static_cast<std::size_t>(std::stoull(a));
      r.identity = std::stoi(b);
      r.camera = std::stoi(c);
    } catch (const std::exception&) {
      raise(Errc::MissingId, "label row " + std::to_string(lineno) + " is not numeric");
    }
    rows.push_back(r);
  }
  if (rows.empty()) raise(Errc::IoError, "label file has no data rows: " + path);

  GroundTruth gt;
  gt.identity.assign(rows.size(), 0);
  gt.camera.assign(rows.size(), 0);
  std::vector<bool> seen(rows.size(), false);
  for (const Row& r : rows) {
    if (r.id >= rows.size())
      raise(Errc::NonDense, "sample ids must cover 0.." + std::to_string(rows.size() - 1));
    if (seen[r.id]) raise(Errc::DuplicateId, "duplicate sample_id " + std::to_string(r.id));
    seen[r.id] = true;
    gt.identity[r.id] = r.identity;
    gt.camera[r.id] = r.camera;
  }
  return gt;
}

}  // namespace gsamp
