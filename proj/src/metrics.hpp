#pragma once

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace fnbn {

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Row argmax with ties broken toward class 0.
int argmax_binary(double p0, double p1);
std::vector<int> predict(const Tensor& probs);

ConfusionCounts confusion_for_class(const std::vector<int>& predictions,
                                    const std::vector<int>& labels, int target_class);

// precision = tp/(tp+fp), recall = tp/(tp+fn), f1 = 2pr/(p+r); 0/0 -> 0.
Prf precision_recall_f1(const ConfusionCounts& c);
double f1_from_pr(double precision, double recall);

// Vector-form Brier score: mean over samples of the squared distance between
// the probability row and the one-hot label (range [0,2] for two classes).
// Rows must sum to 1 within 1e-6.
double brier_score(const Tensor& probs, const std::vector<int>& labels);

struct CalibrationBin {
  double lo = 0.0, hi = 0.0;
  long count = 0;
  double avg_confidence = 0.0;
  double avg_accuracy = 0.0;
};

struct CalibrationReport {
  double brier = 0.0;
  double ece = 0.0;
  double mean_confidence = 0.0;
  std::vector<CalibrationBin> bins;
};

// Equal-width confidence bins over [0,1] (right-inclusive at 1.0);
// confidence is the max row probability;
// ECE = sum_b (count_b/m) * |acc_b - conf_b|, empty bins contribute 0.
CalibrationReport calibration_report(const Tensor& probs, const std::vector<int>& labels,
                                     int n_bins = 10);

struct TraceRow {
  std::int64_t sample_index = 0;
  int ground_truth = 0;
  double p_class1 = 0.0;
};

// One row per sample in evaluation order.
std::vector<TraceRow> softmax_trace(const Tensor& probs, const std::vector<int>& labels);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace fnbn
