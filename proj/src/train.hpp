#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "data.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace fnbn {

struct LossConfig {
  bool weighted = false;      // WL: inverse-frequency class weights
  bool mixup = false;         // MX
  double mixup_alpha = 0.4;
};

// One cell of the ablation grid: six binary flags plus hyperparameters.
// config_id is the bitmask BN*32 + WL*16 + DA*8 + MX*4 + UF*2 + WD*1.
struct TrainConfig {
  bool bn_final = false;      // BN
  bool weighted_loss = false; // WL
  bool data_augment = false;  // DA
  bool mixup = false;         // MX
  bool unfreeze_bn = false;   // UF
  bool weight_decay = false;  // WD

  OptimConfig optim;
  LossConfig loss;
  ModelSpec model;
  double weight_decay_lambda = 1e-4;  // applied when the WD flag is set

  int config_id() const;
  void apply_config_id(int id);
  static TrainConfig from_id(int id);

  // flags/hyper pushed into the sub-configs (model.final_bn etc).
  TrainConfig resolved() const;
};

std::string flags_string(const TrainConfig& c);  // e.g. "bn,wl"
TrainConfig config_with_flags(const std::string& flags);

struct SplitMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  Prf class0, class1;
  double brier = 0.0;
  double ece = 0.0;
  double mean_confidence = 0.0;
};

struct EpochMetrics {
  int epoch = 0;
  SplitMetrics train, val, test;
};

struct RunReport {
  int config_id = 0;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::array<double, 2> class_weights{1.0, 1.0};
  std::vector<EpochMetrics> epochs;
  int best_epoch = -1;  // argmax of minority-class test F1; -1 when no epochs ran
  std::vector<TraceRow> final_test_trace;       // test split, last epoch
  CalibrationReport calibration;                // test split, best epoch
};

// Inverse-frequency weights w_c = N_total / (2 * N_c) from the training split.
std::array<double, 2> inverse_frequency_weights(const Dataset& train);

// Full training run: per epoch shuffle, augment/mixup per flags, train-mode
// forward/backward, SGD step, then eval-mode metrics on all three splits.
// Deterministic in (config, seed). Optionally writes a parameter checkpoint
// of the final model.
RunReport train_run(const TrainConfig& config, const Dataset& train, const Dataset& val,
                    const Dataset& test, std::uint64_t seed,
                    const std::string& checkpoint_path = "");

// Serialization (schemas are the external contract; see README).
std::string metrics_csv(const RunReport& report);
std::string trace_csv(const std::vector<TraceRow>& rows);
std::string reliability_csv(const CalibrationReport& calibration);
std::string report_json(const RunReport& report);
nlohmann::json hyper_json(const TrainConfig& c);
nlohmann::json flags_json(const TrainConfig& c);

void write_run_artifacts(const RunReport& report, const std::string& out_dir);

}  // namespace fnbn
