// Config-driven experiment runner: seeded ensembles, channel-ratio
// experiments, non-radiativity checks, multisoliton drift checks, resonant
// diagnostics, ladder/wave-map exports; CSV/JSON reports.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chanlab/ground_state.hpp"
#include "chanlab/ladder.hpp"
#include "chanlab/norms.hpp"
#include "chanlab/radial.hpp"
#include "chanlab/wave.hpp"

namespace chanlab {

struct ExperimentConfig {
  int dimension = 8;
  // potential
  std::string potential_kind = "single";  // single | multisoliton | wavemap
  double lambda = 1.0;
  std::vector<double> lambdas;
  WaveMapParams wavemap;
  // grid
  double r_max = 30.0;
  std::size_t points = 1500;
  // time
  double t_max = 20.0;
  double cfl = 0.9;
  std::size_t snapshot_stride = 0;
  // ensemble
  std::size_t count = 0;
  std::uint64_t seed = 1;
  std::pair<double, double> support{1.0, 3.0};
  std::string amplitude = "normal";
  // norm
  double alpha = -3.0;
  std::string z_variant = "plain";  // plain | based | multi | multi-literal
  int gamma_exponent = 1;
  // probes
  std::vector<double> probe_radii{0.0};
  std::string experiment;
};

// Parses and validates; throws with every offending field path listed.
ExperimentConfig parse_config(const nlohmann::json& j);
// Canonical echo of the config (fixed key order) used for hashing/reports.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
// FNV-1a hash of the canonical echo, as a hex string.
std::string config_hash(const ExperimentConfig& cfg);

// Deterministic child seed for ensemble item `index`.
std::uint64_t child_seed(std::uint64_t seed, std::size_t index);

// Random finite sums of <= 5 smooth bumps supported in [a, b], placed in the
// parity slot, unit-normalized in H1 x L2. Deterministic in (seed, index).
std::vector<WaveState> generate_ensemble(std::uint64_t seed, std::size_t count,
                                         std::pair<double, double> support,
                                         int parity_slot, GridPtr grid, int N);

struct ChannelRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double e_out_minus = 0.0;
  double e_out_plus = 0.0;
  double proj_norm = 0.0;
  double z_norm_value = 0.0;
  double ratio = 0.0;
  double plateau_quality = 0.0;
  double gram_condition = 1.0;
  std::vector<std::string> flags;
};

struct ChannelReport {
  std::vector<ChannelRecord> records;
  nlohmann::ordered_json summary;
};

// `dump_dir` non-empty: writes per-datum probe CSVs there.
ChannelReport channel_experiment(const ExperimentConfig& cfg, unsigned workers,
                                 const std::string& dump_dir = "");

nlohmann::ordered_json nonradiative_experiment(const ExperimentConfig& cfg,
                                               int k, int sigma);

nlohmann::ordered_json drift_experiment(const ExperimentConfig& cfg);

nlohmann::ordered_json resonant_diagnostic(const ExperimentConfig& cfg,
                                           unsigned workers);

nlohmann::ordered_json ladder_experiment(const ExperimentConfig& cfg,
                                         const std::string& out_dir);

nlohmann::ordered_json wavemap_experiment(const ExperimentConfig& cfg,
                                          const std::string& out_dir);

// Dispatches on cfg.experiment and writes report.json, records.csv and
// probe dumps into out_dir. Deterministic given (config, seed) regardless
// of worker count.
void run_config(const ExperimentConfig& cfg, const std::string& out_dir,
                unsigned workers);

// Effective worker count: explicit request, capped by CHANNEL_LAB_WORKERS.
unsigned resolve_workers(unsigned requested);

}  // namespace chanlab
