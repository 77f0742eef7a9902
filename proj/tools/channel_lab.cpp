// channel_lab: config-driven runner for the channel-of-energy laboratory.
// Subcommands pick the experiment; the config file provides everything else.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "chanlab/experiments.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed = -1;
  unsigned workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "override ensemble seed");
  cmd->add_option("--workers", opts.workers, "worker thread count");
}

int run(const CommonOpts& opts, const std::string& experiment) {
  std::ifstream in(opts.config_path);
  nlohmann::json raw = nlohmann::json::parse(in);
  raw["experiment"] = experiment;
  chanlab::ExperimentConfig cfg = chanlab::parse_config(raw);
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  chanlab::run_config(cfg, opts.out_dir, opts.workers);
  std::cout << "wrote " << opts.out_dir << "/report.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"channel-of-energy numerical laboratory"};
  app.require_subcommand(1);

  const char* names[] = {"ladder", "nonradiative", "channel",
                         "drift",  "resonant",     "wavemap"};
  const char* descs[] = {
      "build and export the generalized-eigenfunction ladders",
      "non-radiativity decay checks for the polynomial solutions",
      "channel-ratio ensemble experiment",
      "multisoliton drift experiment",
      "resonant-component diagnostics",
      "equivariant wave-map profiles and linearized potential"};

  CommonOpts opts[6];
  for (int i = 0; i < 6; ++i) add_common(app.add_subcommand(names[i], descs[i]), opts[i]);

  CLI11_PARSE(app, argc, argv);

  try {
    for (int i = 0; i < 6; ++i)
      if (app.get_subcommand(names[i])->parsed()) return run(opts[i], names[i]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
