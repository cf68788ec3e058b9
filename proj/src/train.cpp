#include "train.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "loss.hpp"

namespace fnbn {

int TrainConfig::config_id() const {
  return (bn_final ? 32 : 0) + (weighted_loss ? 16 : 0) + (data_augment ? 8 : 0) +
         (mixup ? 4 : 0) + (unfreeze_bn ? 2 : 0) + (weight_decay ? 1 : 0);
}

void TrainConfig::apply_config_id(int id) {
  if (id < 0 || id > 63) {
    throw std::invalid_argument("config id " + std::to_string(id) + " outside 0..63");
  }
  bn_final = (id & 32) != 0;
  weighted_loss = (id & 16) != 0;
  data_augment = (id & 8) != 0;
  mixup = (id & 4) != 0;
  unfreeze_bn = (id & 2) != 0;
  weight_decay = (id & 1) != 0;
}

TrainConfig TrainConfig::from_id(int id) {
  TrainConfig c;
  c.apply_config_id(id);
  return c;
}

TrainConfig TrainConfig::resolved() const {
  TrainConfig c = *this;
  c.model.final_bn = c.bn_final;
  c.model.freeze_trunk_bn = !c.unfreeze_bn;
  c.loss.weighted = c.weighted_loss;
  c.loss.mixup = c.mixup;
  c.optim.weight_decay = c.weight_decay ? c.weight_decay_lambda : 0.0;
  return c;
}

std::string flags_string(const TrainConfig& c) {
  std::string s;
  auto add = [&s](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ",";
    s += name;
  };
  add(c.bn_final, "bn");
  add(c.weighted_loss, "wl");
  add(c.data_augment, "da");
  add(c.mixup, "mx");
  add(c.unfreeze_bn, "uf");
  add(c.weight_decay, "wd");
  return s;
}

TrainConfig config_with_flags(const std::string& flags) {
  TrainConfig c;
  std::istringstream is(flags);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "bn") c.bn_final = true;
    else if (tok == "wl") c.weighted_loss = true;
    else if (tok == "da") c.data_augment = true;
    else if (tok == "mx") c.mixup = true;
    else if (tok == "uf") c.unfreeze_bn = true;
    else if (tok == "wd") c.weight_decay = true;
    else
      throw std::invalid_argument("unknown flag '" + tok + "' (bn,wl,da,mx,uf,wd)");
  }
  return c;
}

std::array<double, 2> inverse_frequency_weights(const Dataset& train) {
  const auto counts = class_counts(train);
  if (counts[0] == 0 || counts[1] == 0) {
    throw std::invalid_argument("weighted loss needs both classes in the training split (have " +
                                std::to_string(counts[0]) + "/" + std::to_string(counts[1]) + ")");
  }
  const double total = static_cast<double>(counts[0] + counts[1]);
  return {total / (2.0 * static_cast<double>(counts[0])),
          total / (2.0 * static_cast<double>(counts[1]))};
}

namespace {

Tensor batch_tensor(const Dataset& ds, const std::vector<std::size_t>& idx, std::size_t from,
                    std::size_t to) {
  const std::size_t m = to - from;
  const std::size_t h = ds.front().pixels.dim(1), w = ds.front().pixels.dim(2);
  Tensor x({m, 1, h, w});
  double* out = x.data();
  for (std::size_t i = from; i < to; ++i) {
    const Tensor& px = ds[idx[i]].pixels;
    std::copy(px.values().begin(), px.values().end(), out + (i - from) * h * w);
  }
  return x;
}

struct EvalOutput {
  Tensor probs;
  std::vector<int> labels;
  SplitMetrics metrics;
  CalibrationReport calibration;
};

EvalOutput evaluate_split(Model& model, const Dataset& ds,
                          const std::array<double, 2>& class_weights, Rng& rng) {
  EvalOutput out;
  const std::size_t n = ds.size();
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = ds[i].label;
  if (n == 0) {
    out.probs = Tensor({1, 2});  // placeholder, metrics stay zero
    out.metrics = SplitMetrics{};
    return out;
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  out.probs = Tensor({n, 2});
  double loss_sum = 0.0;
  double weight_sum = 0.0;
  const std::size_t chunk = 256;  // eval mode has no batch coupling
  for (std::size_t from = 0; from < n; from += chunk) {
    const std::size_t to = std::min(n, from + chunk);
    Tensor x = batch_tensor(ds, idx, from, to);
    Tensor logits = model.forward(x, Mode::kEval, rng);
    std::vector<int> labels(out.labels.begin() + static_cast<long>(from),
                            out.labels.begin() + static_cast<long>(to));
    LossResult lr = weighted_cross_entropy(logits, labels, class_weights);
    double chunk_weight = 0.0;
    for (int l : labels) chunk_weight += class_weights[static_cast<std::size_t>(l)];
    loss_sum += lr.loss * chunk_weight;
    weight_sum += chunk_weight;
    Tensor p = softmax(logits);
    for (std::size_t i = from; i < to; ++i) {
      out.probs(i, 0) = p(i - from, 0);
      out.probs(i, 1) = p(i - from, 1);
    }
  }

  const std::vector<int> preds = predict(out.probs);
  out.metrics.loss = loss_sum / weight_sum;
  out.metrics.accuracy = accuracy(preds, out.labels);
  out.metrics.class0 = precision_recall_f1(confusion_for_class(preds, out.labels, 0));
  out.metrics.class1 = precision_recall_f1(confusion_for_class(preds, out.labels, 1));
  out.calibration = calibration_report(out.probs, out.labels);
  out.metrics.brier = out.calibration.brier;
  out.metrics.ece = out.calibration.ece;
  out.metrics.mean_confidence = out.calibration.mean_confidence;
  return out;
}

}  // namespace

RunReport train_run(const TrainConfig& config_in, const Dataset& train, const Dataset& val,
                    const Dataset& test, std::uint64_t seed, const std::string& checkpoint_path) {
  const TrainConfig config = config_in.resolved();
  RunReport report;
  report.config = config;
  report.config_id = config.config_id();
  report.seed = seed;

  Rng rng(seed);
  Model model(config.model, rng());

  std::array<double, 2> weights{1.0, 1.0};
  if (config.loss.weighted && !train.empty()) weights = inverse_frequency_weights(train);
  report.class_weights = weights;

  const std::size_t n = train.size();
  const std::size_t batch = static_cast<std::size_t>(config.optim.batch_size);
  if (config.optim.batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");

  // Batches of fewer than 2 samples cannot train BN layers; a trailing
  // remainder of 1 is dropped.
  long steps_per_epoch = 0;
  if (n >= 2) {
    steps_per_epoch = static_cast<long>(n / batch);
    if (n % batch >= 2) steps_per_epoch++;
  }
  const long total_steps = steps_per_epoch * static_cast<long>(config.optim.epochs);

  Sgd sgd(config.optim.momentum, config.optim.weight_decay);
  std::vector<ParamRef> params = model.params();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<CalibrationReport> test_calibrations;
  std::vector<TraceRow> last_trace;
  long global_step = 0;

  for (int epoch = 0; epoch < config.optim.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    long epoch_steps = 0;
    for (std::size_t from = 0; from < n && epoch_steps < steps_per_epoch; from += batch) {
      const std::size_t to = std::min(n, from + batch);
      const std::size_t m = to - from;
      if (m < 2) break;

      Tensor x({m, 1, train.front().pixels.dim(1), train.front().pixels.dim(2)});
      std::vector<int> labels(m);
      for (std::size_t i = 0; i < m; ++i) {
        const LabeledImage& src = train[order[from + i]];
        const LabeledImage img = config.data_augment ? augment(src, rng) : src;
        std::copy(img.pixels.values().begin(), img.pixels.values().end(),
                  x.data() + i * img.pixels.size());
        labels[i] = img.label;
      }
      Tensor targets = one_hot(labels, 2);
      if (config.loss.mixup) {
        MixupResult mixed = mixup_batch(x, targets, config.loss.mixup_alpha, rng);
        x = std::move(mixed.x);
        targets = std::move(mixed.y);
      }

      Tensor logits;
      LossResult lr_result;
      try {
        logits = model.forward(x, Mode::kTrain, rng);
        lr_result = weighted_cross_entropy(logits, targets, weights);
        model.backward(lr_result.grad_logits);
        const double lr_now = lr_at(config.optim.schedule, config.optim.base_lr, epoch,
                                    global_step, total_steps);
        sgd.step(params, lr_now);
      } catch (const std::exception& e) {
        throw std::runtime_error("run aborted at epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(epoch_steps) + ": " + e.what());
      }
      global_step++;
      epoch_steps++;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train = evaluate_split(model, train, weights, rng).metrics;
    em.val = evaluate_split(model, val, weights, rng).metrics;
    EvalOutput test_out = evaluate_split(model, test, weights, rng);
    em.test = test_out.metrics;
    report.epochs.push_back(em);
    test_calibrations.push_back(test_out.calibration);
    if (!test.empty()) last_trace = softmax_trace(test_out.probs, test_out.labels);
  }

  if (!report.epochs.empty()) {
    int best = 0;
    for (std::size_t e = 1; e < report.epochs.size(); ++e) {
      if (report.epochs[e].test.class1.f1 > report.epochs[static_cast<std::size_t>(best)].test.class1.f1) {
        best = static_cast<int>(e);
      }
    }
    report.best_epoch = best;
    report.calibration = test_calibrations[static_cast<std::size_t>(best)];
    report.final_test_trace = std::move(last_trace);
  }

  if (!checkpoint_path.empty()) model.save_params(checkpoint_path);
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void append_split_row(std::string& out, int epoch, const char* split, const SplitMetrics& m) {
  out += std::to_string(epoch);
  out += ",";
  out += split;
  for (double v : {m.loss, m.accuracy, m.class0.precision, m.class0.recall, m.class0.f1,
                   m.class1.precision, m.class1.recall, m.class1.f1, m.brier, m.ece,
                   m.mean_confidence}) {
    out += ",";
    out += fmt(v);
  }
  out += "\n";
}

}  // namespace

std::string metrics_csv(const RunReport& report) {
  std::string out =
      "epoch,split,loss,accuracy,precision0,recall0,f10,precision1,recall1,f11,brier,ece,"
      "mean_confidence\n";
  for (const EpochMetrics& em : report.epochs) {
    append_split_row(out, em.epoch, "train", em.train);
    append_split_row(out, em.epoch, "val", em.val);
    append_split_row(out, em.epoch, "test", em.test);
  }
  return out;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string out = "sample_index,ground_truth,p_class1\n";
  for (const TraceRow& r : rows) {
    out += std::to_string(r.sample_index);
    out += ",";
    out += std::to_string(r.ground_truth);
    out += ",";
    out += fmt(r.p_class1);
    out += "\n";
  }
  return out;
}

std::string reliability_csv(const CalibrationReport& calibration) {
  std::string out = "bin_lo,bin_hi,count,avg_confidence,avg_accuracy\n";
  for (const CalibrationBin& b : calibration.bins) {
    out += fmt(b.lo);
    out += ",";
    out += fmt(b.hi);
    out += ",";
    out += std::to_string(b.count);
    out += ",";
    out += fmt(b.avg_confidence);
    out += ",";
    out += fmt(b.avg_accuracy);
    out += "\n";
  }
  return out;
}

namespace {

nlohmann::json split_json(const SplitMetrics& m) {
  return nlohmann::json{{"loss", m.loss},
                        {"accuracy", m.accuracy},
                        {"precision0", m.class0.precision},
                        {"recall0", m.class0.recall},
                        {"f10", m.class0.f1},
                        {"precision1", m.class1.precision},
                        {"recall1", m.class1.recall},
                        {"f11", m.class1.f1},
                        {"brier", m.brier},
                        {"ece", m.ece},
                        {"mean_confidence", m.mean_confidence}};
}

}  // namespace

nlohmann::json hyper_json(const TrainConfig& c) {
  return nlohmann::json{{"base_lr", c.optim.base_lr},
                        {"momentum", c.optim.momentum},
                        {"weight_decay_lambda", c.weight_decay_lambda},
                        {"schedule", schedule_to_string(c.optim.schedule)},
                        {"epochs", c.optim.epochs},
                        {"batch_size", c.optim.batch_size},
                        {"mixup_alpha", c.loss.mixup_alpha},
                        {"hidden_size", c.model.hidden_size},
                        {"image_size", c.model.image_size},
                        {"conv1_channels", c.model.conv1_channels},
                        {"conv2_channels", c.model.conv2_channels},
                        {"bn_epsilon", c.model.bn_epsilon},
                        {"bn_momentum", c.model.bn_momentum},
                        {"dropout1", c.model.dropout1},
                        {"dropout2", c.model.dropout2},
                        {"final_bn_learnable", c.model.final_bn_learnable}};
}

nlohmann::json flags_json(const TrainConfig& c) {
  return nlohmann::json{{"bn", c.bn_final},  {"wl", c.weighted_loss}, {"da", c.data_augment},
                        {"mx", c.mixup},     {"uf", c.unfreeze_bn},   {"wd", c.weight_decay}};
}

std::string report_json(const RunReport& report) {
  nlohmann::json j;
  j["schema"] = "fnbn-run-v1";
  j["config_id"] = report.config_id;
  j["flags"] = flags_json(report.config);
  j["hyper"] = hyper_json(report.config);
  j["seed"] = report.seed;
  j["class_weights"] = {report.class_weights[0], report.class_weights[1]};
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochMetrics& em : report.epochs) {
    epochs.push_back(nlohmann::json{{"epoch", em.epoch},
                                    {"train", split_json(em.train)},
                                    {"val", split_json(em.val)},
                                    {"test", split_json(em.test)}});
  }
  j["epochs"] = epochs;
  j["best_epoch"] = report.best_epoch;
  nlohmann::json bins = nlohmann::json::array();
  for (const CalibrationBin& b : report.calibration.bins) {
    bins.push_back(nlohmann::json{{"lo", b.lo},
                                  {"hi", b.hi},
                                  {"count", b.count},
                                  {"avg_confidence", b.avg_confidence},
                                  {"avg_accuracy", b.avg_accuracy}});
  }
  j["calibration"] = nlohmann::json{{"brier", report.calibration.brier},
                                    {"ece", report.calibration.ece},
                                    {"mean_confidence", report.calibration.mean_confidence},
                                    {"bins", bins}};
  return j.dump(2) + "\n";
}

void write_run_artifacts(const RunReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto write = [&out_dir](const char* name, const std::string& content) {
    const std::string path = out_dir + "/" + name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << content;
    if (!os) throw std::runtime_error("write failed: " + path);
  };
  write("metrics.csv", metrics_csv(report));
  write("trace.csv", trace_csv(report.final_test_trace));
  write("reliability.csv", reliability_csv(report.calibration));
  write("report.json", report_json(report));
}

}  // namespace fnbn
