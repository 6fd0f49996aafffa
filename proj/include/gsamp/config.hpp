#pragma once

// Run configuration: a flat `section.key = value` text format with `#`
// comments. Parsing is total: unknown keys and malformed values are errors
// that name the offending key, so typos never fall back to defaults silently.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "gsamp/learner.hpp"
#include "gsamp/synth.hpp"

namespace gsamp {

struct RunConfig {
  std::uint64_t seed = 0;
  SynthConfig synth;
  bool synth_seed_set = false;  // when false, synth.seed follows run.seed
  TrainConfig train;

  // Applies the seed-following rule; call after parsing / overrides.
  void resolve() {
    if (!synth_seed_set) synth.seed = seed;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    raise(Errc::ConfigError, key + ": expected a number, got `" + value + "`");
  }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    if (!value.empty() && value[0] == '-') throw std::invalid_argument(value);
    const std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    raise(Errc::ConfigError, key + ": expected a non-negative integer, got `" + value + "`");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  raise(Errc::ConfigError, key + ": expected true or false, got `" + value + "`");
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_u64;

  if (key == "run.seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "synth.num_identities") {
    cfg.synth.num_identities = parse_u64(key, value);
  } else if (key == "synth.samples_per_identity") {
    cfg.synth.samples_per_identity = parse_u64(key, value);
  } else if (key == "synth.obs_dim") {
    cfg.synth.obs_dim = parse_u64(key, value);
  } else if (key == "synth.num_cameras") {
    cfg.synth.num_cameras = parse_u64(key, value);
  } else if (key == "synth.identity_noise") {
    cfg.synth.identity_noise = parse_double(key, value);
  } else if (key == "synth.camera_offset_scale") {
    cfg.synth.camera_offset_scale = parse_double(key, value);
  } else if (key == "synth.query_fraction") {
    cfg.synth.query_fraction = parse_double(key, value);
  } else if (key == "synth.seed") {
    cfg.synth.seed = parse_u64(key, value);
    cfg.synth_seed_set = true;
  } else if (key == "train.tau") {
    cfg.train.tau = parse_double(key, value);
  } else if (key == "train.momentum") {
    cfg.train.momentum = parse_double(key, value);
  } else if (key == "train.lr") {
    cfg.train.lr = parse_double(key, value);
  } else if (key == "train.lr_decay") {
    cfg.train.lr_decay = parse_u64(key, value);
  } else if (key == "train.epochs") {
    cfg.train.epochs = parse_u64(key, value);
  } else if (key == "train.batch_size") {
    cfg.train.batch_size = parse_u64(key, value);
  } else if (key == "train.feature_dim") {
    cfg.train.feature_dim = parse_u64(key, value);
  } else if (key == "train.loss_mode") {
    if (value == "clusters_only") {
      cfg.train.loss_mode = LossMode::kClustersOnly;
    } else if (value == "clusters_plus_outliers") {
      cfg.train.loss_mode = LossMode::kClustersPlusOutliers;
    } else {
      raise(Errc::ConfigError,
            key + ": expected clusters_only or clusters_plus_outliers, got `" + value + "`");
    }
  } else if (key == "cluster.eps") {
    cfg.train.dbscan.eps = parse_double(key, value);
  } else if (key == "cluster.min_pts") {
    cfg.train.dbscan.min_pts = parse_u64(key, value);
  } else if (key == "affinity.k") {
    cfg.train.affinity_k = parse_u64(key, value);
  } else if (key == "sampler.kind") {
    if (value == "group") {
      cfg.train.sampler.kind = SamplerConfig::Kind::kGroup;
    } else if (value == "random") {
      cfg.train.sampler.kind = SamplerConfig::Kind::kRandom;
    } else if (value == "block") {
      cfg.train.sampler.kind = SamplerConfig::Kind::kBlock;
    } else if (value == "pk") {
      cfg.train.sampler.kind = SamplerConfig::Kind::kPk;
    } else {
      raise(Errc::ConfigError, key + ": expected group|random|block|pk, got `" + value + "`");
    }
  } else if (key == "sampler.N") {
    cfg.train.sampler.group_size = parse_u64(key, value);
  } else if (key == "sampler.M") {
    if (value == "all") {
      cfg.train.sampler.shuffle_degree = kShuffleAll;
    } else {
      const std::uint64_t m = parse_u64(key, value);
      if (m == 0) raise(Errc::ConfigError, "sampler.M: must be >= 1 or `all`");
      cfg.train.sampler.shuffle_degree = m;
    }
  } else if (key == "sampler.P") {
    cfg.train.sampler.clusters_per_batch = parse_u64(key, value);
  } else if (key == "sampler.K") {
    cfg.train.sampler.instances_per_cluster = parse_u64(key, value);
  } else if (key == "metrics.retrieval") {
    cfg.train.eval_retrieval = parse_bool(key, value);
  } else {
    raise(Errc::ConfigError, "unknown key `" + key + "`");
  }
}

inline RunConfig parse_config_text(std::istream& is) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      raise(Errc::ConfigError,
            "line " + std::to_string(lineno) + ": expected `section.key = value`");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      raise(Errc::ConfigError, "line " + std::to_string(lineno) + ": empty key or value");
    apply_config_entry(cfg, key, value);
  }
  cfg.resolve();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) raise(Errc::IoError, "cannot open config: " + path);
  return parse_config_text(is);
}

inline void validate_run_config(const RunConfig& cfg) {
  validate_synth_config(cfg.synth);
  validate_train_config(cfg.train);
}

// Resolved config echo, re-parseable by load_config.
inline std::string config_snapshot(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "run.seed = " << cfg.seed << "\n";
  os << "synth.num_identities = " << cfg.synth.num_identities << "\n";
  os << "synth.samples_per_identity = " << cfg.synth.samples_per_identity << "\n";
  os << "synth.obs_dim = " << cfg.synth.obs_dim << "\n";
  os << "synth.num_cameras = " << cfg.synth.num_cameras << "\n";
  os << "synth.identity_noise = " << cfg.synth.identity_noise << "\n";
  os << "synth.camera_offset_scale = " << cfg.synth.camera_offset_scale << "\n";
  os << "synth.query_fraction = " << cfg.synth.query_fraction << "\n";
  os << "synth.seed = " << cfg.synth.seed << "\n";
  os << "train.tau = " << cfg.train.tau << "\n";
  os << "train.momentum = " << cfg.train.momentum << "\n";
  os << "train.lr = " << cfg.train.lr << "\n";
  os << "train.lr_decay = " << cfg.train.lr_decay << "\n";
  os << "train.epochs = " << cfg.train.epochs << "\n";
  os << "train.batch_size = " << cfg.train.batch_size << "\n";
  os << "train.feature_dim = " << cfg.train.feature_dim << "\n";
  os << "train.loss_mode = "
     << (cfg.train.loss_mode == LossMode::kClustersOnly ? "clusters_only"
                                                        : "clusters_plus_outliers")
     << "\n";
  os << "cluster.eps = " << cfg.train.dbscan.eps << "\n";
  os << "cluster.min_pts = " << cfg.train.dbscan.min_pts << "\n";
  os << "affinity.k = " << cfg.train.affinity_k << "\n";
  os << "sampler.kind = ";
  switch (cfg.train.sampler.kind) {
    case SamplerConfig::Kind::kGroup: os << "group"; break;
    case SamplerConfig::Kind::kRandom: os << "random"; break;
    case SamplerConfig::Kind::kBlock: os << "block"; break;
    case SamplerConfig::Kind::kPk: os << "pk"; break;
  }
  os << "\n";
  os << "sampler.N = " << cfg.train.sampler.group_size << "\n";
  if (cfg.train.sampler.shuffle_degree == kShuffleAll) {
    os << "sampler.M = all\n";
  } else {
    os << "sampler.M = " << cfg.train.sampler.shuffle_degree << "\n";
  }
  os << "sampler.P = " << cfg.train.sampler.clusters_per_batch << "\n";
  os << "sampler.K = " << cfg.train.sampler.instances_per_cluster << "\n";
  os << "metrics.retrieval = " << (cfg.train.eval_retrieval ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace gsamp
