// gsamp — pseudo-label self-training experiment runner.
//
//   gsamp run --config <path> --out <dir> [--seed <u64>]
//   gsamp eval --features <path> --labels <path> --config <path>
//   gsamp compare <dirA> <dirB>

#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gsamp/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"group-sampling pseudo-label self-training runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir, features_path, labels_path, dir_a, dir_b;
  std::uint64_t seed = 0;

  CLI::App* run = app.add_subcommand("run", "execute a training run");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed, "override run.seed");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a feature dump");
  eval->add_option("--features", features_path, "feature file")->required();
  eval->add_option("--labels", labels_path, "label csv")->required();
  eval->add_option("--config", config_path, "config file")->required();

  CLI::App* compare = app.add_subcommand("compare", "final-epoch metric deltas of two runs");
  compare->add_option("dirA", dir_a, "first run directory")->required();
  compare->add_option("dirB", dir_b, "second run directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    std::optional<std::uint64_t> seed_override;
    if (seed_opt->count() > 0) seed_override = seed;
    return gsamp::cmd_run(config_path, out_dir, seed_override);
  }
  if (eval->parsed()) return gsamp::cmd_eval(features_path, labels_path, config_path);
  return gsamp::cmd_compare(dir_a, dir_b);
}
