#pragma once

#include <optional>
#include <string>
#include <vector>

#include "train.hpp"

namespace fnbn {

// Grid manifest JSON:
//   {"protocol": "default" | {"train":[M,m],"val":[M,m],"test":[M,m]},
//    "repeats": R, "base_seed": S, "hyper": {...partial overrides...},
//    "configs": [ids...]}
struct GridManifest {
  SkewProtocol protocol;
  int repeats = 10;
  std::uint64_t base_seed = 42;
  TrainConfig hyper;  // flag bits are ignored; per-cell flags come from configs
  std::vector<int> configs;
};

GridManifest parse_manifest(const nlohmann::json& j);
GridManifest load_manifest(const std::string& path);
nlohmann::json manifest_json(const GridManifest& m);

struct RunOutcome {
  int config_id = 0;
  int repeat = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunReport report;
};

struct ConfigSummary {
  int config_id = 0;
  TrainConfig config;
  std::vector<RunOutcome> runs;
  int n_ok = 0;
  int n_failed = 0;
  // Aggregates over successful runs, at each run's best epoch.
  double mean_f1_minority = 0.0, std_f1_minority = 0.0;
  double mean_f1_majority = 0.0, std_f1_majority = 0.0;
  double mean_ece = 0.0, mean_brier = 0.0, mean_confidence = 0.0;
  int best_epoch_mode = -1;  // most frequent per-run best epoch (lowest wins ties)
};

struct GridSummary {
  GridManifest manifest;
  std::vector<ConfigSummary> configs;  // ordered as in the manifest
  std::vector<int> ranking;            // config ids by descending mean minority F1
};

// Deterministic dataset seeds derived from the manifest base seed.
std::uint64_t grid_pool_seed(std::uint64_t base_seed);
std::uint64_t grid_split_seed(std::uint64_t base_seed);
Splits prepare_grid_data(const GridManifest& m);

// Runs every (config, repeat) cell on a pool of `workers` threads with
// per-cell seeds base_seed XOR hash(config_id, repeat). If out_dir is
// nonempty, writes out/<config_id>/<repeat>/{metrics.csv,trace.csv,
// reliability.csv,report.json} plus summary.json and best_worst.csv.
// Failed cells are recorded and excluded from aggregates.
GridSummary run_grid(const GridManifest& manifest, const Splits& data, int workers,
                     const std::string& out_dir);

std::string summary_json(const GridSummary& summary);
GridSummary load_summary(const std::string& out_dir);  // from out_dir/summary.json (aggregates only)

// Top-k and bottom-k configs by mean minority F1 (ties to lower id), with a
// trailing annotation on whether the final-BN flag separates best from worst.
std::string best_worst_csv(const GridSummary& summary, int k = 3);

// Comparison of configs 0 (all off), 16 (WL only) and 32 (final BN only):
// per-class mean F1 plus the BN-minus-WL improvement column.
std::string three_way_csv(const GridSummary& summary);

// Minority-class softmax outputs of a config pair, each column sorted
// ascending, read back from trace.csv files under out_dir.
std::string confident_wrongs_csv(const std::string& out_dir, int config_without, int config_with,
                                 int repeat);

}  // namespace fnbn
