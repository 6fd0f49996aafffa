#pragma once

// Experiment runner commands. A run directory is self-contained: the resolved
// config echo, the per-epoch metrics CSV, the feature/label dumps that
// reproduce the final row's clustering metrics, the final encoder parameters
// and a JSON summary.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsamp/config.hpp"
#include "gsamp/learner.hpp"
#include "gsamp/synth.hpp"

namespace gsamp {

inline constexpr const char* kEpochCsvHeader =
    "epoch,num_clusters,num_outliers,nmi,purity,chaos,intra_var,inter_var,"
    "correction_rate,misleading_rate,mean_loss,map,top1,top5,top10";

namespace detail {

// Shortest exact decimal form: %.17g round-trips every double.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string csv_row(const EpochMetrics& m) {
  std::string row = std::to_string(m.epoch);
  row += "," + std::to_string(m.num_clusters);
  row += "," + std::to_string(m.num_outliers);
  for (const double v : {m.nmi, m.purity, m.chaos, m.intra_var, m.inter_var, m.correction_rate,
                         m.misleading_rate, m.mean_loss, m.map, m.top1, m.top5, m.top10})
    row += "," + fmt_double(v);
  return row;
}

inline nlohmann::json metrics_json(const EpochMetrics& m, bool with_loss_and_retrieval) {
  nlohmann::json j;
  j["epoch"] = m.epoch;
  j["num_clusters"] = m.num_clusters;
  j["num_outliers"] = m.num_outliers;
  j["nmi"] = m.nmi;
  j["purity"] = m.purity;
  j["chaos"] = m.chaos;
  j["intra_var"] = m.intra_var;
  j["inter_var"] = m.inter_var;
  j["correction_rate"] = m.correction_rate;
  j["misleading_rate"] = m.misleading_rate;
  if (with_loss_and_retrieval) {
    j["mean_loss"] = m.mean_loss;
    j["map"] = m.map;
    j["top1"] = m.top1;
    j["top5"] = m.top5;
    j["top10"] = m.top10;
  }
  return j;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) raise(Errc::IoError, "cannot open: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) raise(Errc::IoError, "empty csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.columns.push_back(cell);
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream rs(line);
    std::vector<double> row;
    while (std::getline(rs, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (row.size() != t.columns.size()) raise(Errc::IoError, "ragged csv row in " + path);
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) raise(Errc::IoError, "csv has no data rows: " + path);
  return t;
}

}  // namespace detail

// run: generate the dataset, execute the training loop, persist the run
// directory. Exit 0 on success.
inline int cmd_run(const std::string& config_path, const std::string& out_dir,
                   std::optional<std::uint64_t> seed_override) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    if (seed_override) {
      cfg.seed = *seed_override;
      cfg.resolve();
    }
    validate_run_config(cfg);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    const Dataset dataset = generate(cfg.synth);
    Rng rng(cfg.seed);
    const TrainResult result = run_training(dataset, cfg.train, rng);

    {
      std::ofstream os(fs::path(out_dir) / "config.snapshot");
      os << config_snapshot(cfg);
    }
    {
      std::ofstream os(fs::path(out_dir) / "epochs.csv");
      os << kEpochCsvHeader << "\n";
      for (const EpochMetrics& m : result.history) os << detail::csv_row(m) << "\n";
    }
    if (!result.history.empty()) {
      write_features((fs::path(out_dir) / "final_features.bin").string(),
                     result.clustered_features);
      write_labels((fs::path(out_dir) / "final_labels.csv").string(), dataset.gt);
      // Encoder checkpoint: one row per output unit, bias in the last column.
      FeatureMatrix params(cfg.train.feature_dim, dataset.observations.dim() + 1, false);
      for (std::size_t r = 0; r < cfg.train.feature_dim; ++r) {
        auto row = params.row(r);
        for (std::size_t c = 0; c < dataset.observations.dim(); ++c)
          row[c] = result.state.params.weight[r * dataset.observations.dim() + c];
        row[dataset.observations.dim()] = result.state.params.bias[r];
      }
      write_features((fs::path(out_dir) / "final_params.bin").string(), params);
    }
    {
      nlohmann::json summary;
      summary["seed"] = cfg.seed;
      summary["epochs"] = cfg.train.epochs;
      summary["samples"] = dataset.observations.n();
      if (!result.history.empty())
        summary["final"] = detail::metrics_json(result.history.back(), true);
      std::ofstream os(fs::path(out_dir) / "summary.json");
      os << summary.dump(2) << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 2;
  }
}

// eval: cluster an external feature dump and print its quality metrics as one
// JSON object on stdout. Loss and retrieval fields are omitted (no queries).
inline int cmd_eval(const std::string& features_path, const std::string& labels_path,
                    const std::string& config_path) {
  try {
    const RunConfig cfg = load_config(config_path);
    validate_run_config(cfg);
    FeatureMatrix features = read_features(features_path);
    features.set_unit_rows(true);
    validate_matrix(features);  // rejects non-normalized or non-finite dumps
    const GroundTruth gt = read_labels(labels_path);
    if (gt.size() != features.n())
      raise(Errc::ShapeMismatch, "features have " + std::to_string(features.n()) +
                                     " rows but labels have " + std::to_string(gt.size()));

    const PseudoLabeling labels =
        generate_pseudo_labels(features, cfg.train.affinity_k, cfg.train.dbscan);
    EpochMetrics m;
    m.num_clusters = labels.num_clusters();
    m.num_outliers = labels.outliers.size();
    m.nmi = nmi(labels, gt);
    if (labels.num_clusters() > 0) {
      m.purity = purity(labels, gt);
      m.chaos = chaos(labels, gt);
      const VariancePair vp = variances(features, labels);
      m.intra_var = vp.intra;
      m.inter_var = vp.inter;
    }
    std::cout << detail::metrics_json(m, false).dump() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "eval failed: " << e.what() << "\n";
    return 1;
  }
}

// compare: final-epoch metric deltas (b - a), one line per column.
inline int cmd_compare(const std::string& dir_a, const std::string& dir_b) {
  try {
    namespace fs = std::filesystem;
    const detail::CsvTable a = detail::read_csv((fs::path(dir_a) / "epochs.csv").string());
    const detail::CsvTable b = detail::read_csv((fs::path(dir_b) / "epochs.csv").string());
    if (a.columns != b.columns) raise(Errc::IoError, "column mismatch between runs");
    const auto& fa = a.rows.back();
    const auto& fb = b.rows.back();
    std::cout << std::left << std::setw(18) << "metric" << std::right << std::setw(16) << "a"
              << std::setw(16) << "b" << std::setw(16) << "delta(b-a)" << "\n";
    std::cout << std::setprecision(6);
    for (std::size_t c = 0; c < a.columns.size(); ++c) {
      std::cout << std::left << std::setw(18) << a.columns[c] << std::right << std::setw(16)
                << fa[c] << std::setw(16) << fb[c] << std::setw(16) << fb[c] - fa[c] << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "compare failed: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gsamp
