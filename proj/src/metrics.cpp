#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fnbn {

int argmax_binary(double p0, double p1) { return p1 > p0 ? 1 : 0; }

std::vector<int> predict(const Tensor& probs) {
  if (probs.rank() != 2 || probs.dim(1) != 2) {
    throw std::invalid_argument("predict expects [m x 2] probabilities");
  }
  std::vector<int> out(probs.dim(0));
  for (std::size_t i = 0; i < probs.dim(0); ++i) out[i] = argmax_binary(probs(i, 0), probs(i, 1));
  return out;
}

ConfusionCounts confusion_for_class(const std::vector<int>& predictions,
                                    const std::vector<int>& labels, int target_class) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("prediction/label count mismatch");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred_pos = predictions[i] == target_class;
    const bool true_pos = labels[i] == target_class;
    if (pred_pos && true_pos) c.tp++;
    else if (pred_pos && !true_pos) c.fp++;
    else if (!pred_pos && true_pos) c.fn++;
    else c.tn++;
  }
  return c;
}

double f1_from_pr(double precision, double recall) {
  const double denom = precision + recall;
  if (denom == 0.0) return 0.0;
  return 2.0 * precision * recall / denom;
}

Prf precision_recall_f1(const ConfusionCounts& c) {
  Prf r;
  r.precision = (c.tp + c.fp) == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  r.recall = (c.tp + c.fn) == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  r.f1 = f1_from_pr(r.precision, r.recall);
  return r;
}

namespace {

void check_prob_rows(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.rank() != 2 || probs.dim(1) != 2) {
    throw std::invalid_argument("expected [m x 2] probabilities, got " + shape_string(probs));
  }
  if (labels.size() != probs.dim(0)) {
    throw std::invalid_argument("probability/label count mismatch");
  }
}

}  // namespace

double brier_score(const Tensor& probs, const std::vector<int>& labels) {
  check_prob_rows(probs, labels);
  const std::size_t m = probs.dim(0);
  if (m == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (std::fabs(probs(i, 0) + probs(i, 1) - 1.0) > 1e-6) {
      throw std::invalid_argument("probability row " + std::to_string(i) + " does not sum to 1");
    }
    const double t0 = labels[i] == 0 ? 1.0 : 0.0;
    const double t1 = 1.0 - t0;
    const double d0 = probs(i, 0) - t0, d1 = probs(i, 1) - t1;
    total += d0 * d0 + d1 * d1;
  }
  return total / static_cast<double>(m);
}

CalibrationReport calibration_report(const Tensor& probs, const std::vector<int>& labels,
                                     int n_bins) {
  check_prob_rows(probs, labels);
  if (n_bins < 1) throw std::invalid_argument("n_bins must be positive");
  const std::size_t m = probs.dim(0);

  CalibrationReport rep;
  rep.bins.resize(static_cast<std::size_t>(n_bins));
  for (int b = 0; b < n_bins; ++b) {
    rep.bins[static_cast<std::size_t>(b)].lo = static_cast<double>(b) / n_bins;
    rep.bins[static_cast<std::size_t>(b)].hi = static_cast<double>(b + 1) / n_bins;
  }
  if (m == 0) return rep;

  std::vector<double> conf_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> acc_sum(static_cast<std::size_t>(n_bins), 0.0);
  double conf_total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const int pred = argmax_binary(probs(i, 0), probs(i, 1));
    const double conf = std::max(probs(i, 0), probs(i, 1));
    conf_total += conf;
    int b = static_cast<int>(conf * n_bins);
    if (b >= n_bins) b = n_bins - 1;  // confidence 1.0 joins the top bin
    rep.bins[static_cast<std::size_t>(b)].count++;
    conf_sum[static_cast<std::size_t>(b)] += conf;
    acc_sum[static_cast<std::size_t>(b)] += (pred == labels[i]) ? 1.0 : 0.0;
  }
  double ece = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    CalibrationBin& bin = rep.bins[static_cast<std::size_t>(b)];
    if (bin.count == 0) continue;
    bin.avg_confidence = conf_sum[static_cast<std::size_t>(b)] / static_cast<double>(bin.count);
    bin.avg_accuracy = acc_sum[static_cast<std::size_t>(b)] / static_cast<double>(bin.count);
    ece += (static_cast<double>(bin.count) / static_cast<double>(m)) *
           std::fabs(bin.avg_accuracy - bin.avg_confidence);
  }
  rep.ece = ece;
  rep.mean_confidence = conf_total / static_cast<double>(m);
  rep.brier = brier_score(probs, labels);
  return rep;
}

std::vector<TraceRow> softmax_trace(const Tensor& probs, const std::vector<int>& labels) {
  check_prob_rows(probs, labels);
  std::vector<TraceRow> rows(probs.dim(0));
  for (std::size_t i = 0; i < probs.dim(0); ++i) {
    rows[i] = TraceRow{static_cast<std::int64_t>(i), labels[i], probs(i, 1)};
  }
  return rows;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("prediction/label count mismatch");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (predictions[i] == labels[i]) correct++;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace fnbn
