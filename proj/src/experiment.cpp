#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fnbn {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::array<std::int64_t, 2> parse_pair(const nlohmann::json& j, const char* name) {
  if (!j.is_array() || j.size() != 2) {
    throw std::invalid_argument(std::string("manifest protocol.") + name +
                                " must be [majority, minority]");
  }
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

}  // namespace

GridManifest parse_manifest(const nlohmann::json& j) {
  GridManifest m;
  if (j.contains("protocol")) {
    const auto& p = j.at("protocol");
    if (p.is_string()) {
      if (p.get<std::string>() != "default") {
        throw std::invalid_argument("unknown protocol '" + p.get<std::string>() + "'");
      }
    } else {
      m.protocol.train = parse_pair(p.at("train"), "train");
      m.protocol.val = parse_pair(p.at("val"), "val");
      m.protocol.test = parse_pair(p.at("test"), "test");
    }
  }
  if (j.contains("repeats")) m.repeats = j.at("repeats").get<int>();
  if (m.repeats < 1) throw std::invalid_argument("manifest repeats must be at least 1");
  if (j.contains("base_seed")) m.base_seed = j.at("base_seed").get<std::uint64_t>();
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    TrainConfig& c = m.hyper;
    if (h.contains("base_lr")) c.optim.base_lr = h.at("base_lr").get<double>();
    if (h.contains("momentum")) c.optim.momentum = h.at("momentum").get<double>();
    if (h.contains("weight_decay_lambda"))
      c.weight_decay_lambda = h.at("weight_decay_lambda").get<double>();
    if (h.contains("schedule"))
      c.optim.schedule = schedule_from_string(h.at("schedule").get<std::string>());
    if (h.contains("epochs")) c.optim.epochs = h.at("epochs").get<int>();
    if (h.contains("batch_size")) c.optim.batch_size = h.at("batch_size").get<int>();
    if (h.contains("mixup_alpha")) c.loss.mixup_alpha = h.at("mixup_alpha").get<double>();
    if (h.contains("hidden_size")) c.model.hidden_size = h.at("hidden_size").get<int>();
    if (h.contains("image_size")) c.model.image_size = h.at("image_size").get<int>();
    if (h.contains("conv1_channels")) c.model.conv1_channels = h.at("conv1_channels").get<int>();
    if (h.contains("conv2_channels")) c.model.conv2_channels = h.at("conv2_channels").get<int>();
    if (h.contains("bn_epsilon")) c.model.bn_epsilon = h.at("bn_epsilon").get<double>();
    if (h.contains("bn_momentum")) c.model.bn_momentum = h.at("bn_momentum").get<double>();
    if (h.contains("dropout1")) c.model.dropout1 = h.at("dropout1").get<double>();
    if (h.contains("dropout2")) c.model.dropout2 = h.at("dropout2").get<double>();
    if (h.contains("final_bn_learnable"))
      c.model.final_bn_learnable = h.at("final_bn_learnable").get<bool>();
  }
  if (j.contains("configs")) {
    for (const auto& v : j.at("configs")) {
      const int id = v.get<int>();
      if (id < 0 || id > 63) {
        throw std::invalid_argument("manifest config id " + std::to_string(id) +
                                    " outside 0..63");
      }
      m.configs.push_back(id);
    }
  } else {
    for (int id = 0; id < 64; ++id) m.configs.push_back(id);
  }
  if (m.configs.empty()) throw std::invalid_argument("manifest configs list is empty");
  return m;
}

GridManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest parse error in " + path + ": " + e.what());
  }
  return parse_manifest(j);
}

nlohmann::json manifest_json(const GridManifest& m) {
  nlohmann::json j;
  j["protocol"] = nlohmann::json{{"train", {m.protocol.train[0], m.protocol.train[1]}},
                                 {"val", {m.protocol.val[0], m.protocol.val[1]}},
                                 {"test", {m.protocol.test[0], m.protocol.test[1]}}};
  j["repeats"] = m.repeats;
  j["base_seed"] = m.base_seed;
  j["hyper"] = hyper_json(m.hyper);
  j["configs"] = m.configs;
  return j;
}

std::uint64_t grid_pool_seed(std::uint64_t base_seed) { return splitmix64(base_seed + 1); }
std::uint64_t grid_split_seed(std::uint64_t base_seed) { return splitmix64(base_seed + 2); }

Splits prepare_grid_data(const GridManifest& m) {
  Dataset pool = generate_synthetic(m.protocol.majority_total(), m.protocol.minority_total(),
                                    grid_pool_seed(m.base_seed));
  return make_splits(filter_label(pool, 0), filter_label(pool, 1), m.protocol,
                     grid_split_seed(m.base_seed));
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

void aggregate(ConfigSummary& cs) {
  std::vector<double> f1_min, f1_maj, ece, brier, conf;
  std::map<int, int> best_epochs;
  for (const RunOutcome& run : cs.runs) {
    if (!run.ok) {
      cs.n_failed++;
      continue;
    }
    cs.n_ok++;
    const RunReport& r = run.report;
    if (r.best_epoch >= 0) {
      const SplitMetrics& t = r.epochs[static_cast<std::size_t>(r.best_epoch)].test;
      f1_min.push_back(t.class1.f1);
      f1_maj.push_back(t.class0.f1);
      ece.push_back(t.ece);
      brier.push_back(t.brier);
      conf.push_back(t.mean_confidence);
      best_epochs[r.best_epoch]++;
    }
  }
  cs.mean_f1_minority = mean_of(f1_min);
  cs.std_f1_minority = std_of(f1_min);
  cs.mean_f1_majority = mean_of(f1_maj);
  cs.std_f1_majority = std_of(f1_maj);
  cs.mean_ece = mean_of(ece);
  cs.mean_brier = mean_of(brier);
  cs.mean_confidence = mean_of(conf);
  int best_count = 0;
  for (const auto& [epoch, count] : best_epochs) {
    if (count > best_count) {
      best_count = count;
      cs.best_epoch_mode = epoch;
    }
  }
}

}  // namespace

GridSummary run_grid(const GridManifest& manifest, const Splits& data, int workers,
                     const std::string& out_dir) {
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");

  GridSummary summary;
  summary.manifest = manifest;
  summary.configs.resize(manifest.configs.size());
  for (std::size_t ci = 0; ci < manifest.configs.size(); ++ci) {
    ConfigSummary& cs = summary.configs[ci];
    cs.config_id = manifest.configs[ci];
    cs.config = manifest.hyper;
    cs.config.apply_config_id(cs.config_id);
    cs.config = cs.config.resolved();
    cs.runs.resize(static_cast<std::size_t>(manifest.repeats));
  }

  struct Job {
    std::size_t config_index;
    int repeat;
  };
  std::vector<Job> jobs;
  for (std::size_t ci = 0; ci < manifest.configs.size(); ++ci)
    for (int r = 0; r < manifest.repeats; ++r) jobs.push_back(Job{ci, r});

  std::atomic<std::size_t> next{0};
  auto worker_fn = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      const Job job = jobs[k];
      ConfigSummary& cs = summary.configs[job.config_index];
      RunOutcome& out = cs.runs[static_cast<std::size_t>(job.repeat)];
      out.config_id = cs.config_id;
      out.repeat = job.repeat;
      out.seed = job_seed(manifest.base_seed, cs.config_id, job.repeat);
      try {
        out.report = train_run(cs.config, data.train, data.val, data.test, out.seed);
        out.ok = true;
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
      }
      if (out.ok && !out_dir.empty()) {
        write_run_artifacts(out.report, out_dir + "/" + std::to_string(cs.config_id) + "/" +
                                            std::to_string(job.repeat));
      }
    }
  };

  if (workers == 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
    for (std::thread& t : pool) t.join();
  }

  for (ConfigSummary& cs : summary.configs) aggregate(cs);

  summary.ranking.clear();
  std::vector<std::size_t> order(summary.configs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&summary](std::size_t a, std::size_t b) {
    const ConfigSummary& ca = summary.configs[a];
    const ConfigSummary& cb = summary.configs[b];
    if (ca.mean_f1_minority != cb.mean_f1_minority)
      return ca.mean_f1_minority > cb.mean_f1_minority;
    return ca.config_id < cb.config_id;
  });
  for (std::size_t i : order) summary.ranking.push_back(summary.configs[i].config_id);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    {
      std::ofstream os(out_dir + "/summary.json", std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + out_dir + "/summary.json");
      os << summary_json(summary);
    }
    {
      std::ofstream os(out_dir + "/best_worst.csv", std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + out_dir + "/best_worst.csv");
      os << best_worst_csv(summary);
    }
  }
  return summary;
}

std::string summary_json(const GridSummary& summary) {
  nlohmann::json j;
  j["schema"] = "fnbn-grid-v1";
  j["manifest"] = manifest_json(summary.manifest);
  nlohmann::json configs = nlohmann::json::array();
  for (const ConfigSummary& cs : summary.configs) {
    nlohmann::json runs = nlohmann::json::array();
    for (const RunOutcome& run : cs.runs) {
      nlohmann::json r{{"repeat", run.repeat}, {"seed", run.seed}, {"ok", run.ok}};
      if (run.ok) {
        r["best_epoch"] = run.report.best_epoch;
        if (run.report.best_epoch >= 0) {
          const SplitMetrics& t =
              run.report.epochs[static_cast<std::size_t>(run.report.best_epoch)].test;
          r["f1_minority"] = t.class1.f1;
          r["f1_majority"] = t.class0.f1;
          r["ece"] = t.ece;
          r["brier"] = t.brier;
          r["mean_confidence"] = t.mean_confidence;
        }
      } else {
        r["error"] = run.error;
      }
      runs.push_back(r);
    }
    configs.push_back(nlohmann::json{{"config_id", cs.config_id},
                                     {"flags", flags_json(cs.config)},
                                     {"runs", runs},
                                     {"n_ok", cs.n_ok},
                                     {"n_failed", cs.n_failed},
                                     {"mean_f1_minority", cs.mean_f1_minority},
                                     {"std_f1_minority", cs.std_f1_minority},
                                     {"mean_f1_majority", cs.mean_f1_majority},
                                     {"std_f1_majority", cs.std_f1_majority},
                                     {"mean_ece", cs.mean_ece},
                                     {"mean_brier", cs.mean_brier},
                                     {"mean_confidence", cs.mean_confidence},
                                     {"best_epoch_mode", cs.best_epoch_mode}});
  }
  j["configs"] = configs;
  j["ranking"] = summary.ranking;
  return j.dump(2) + "\n";
}

GridSummary load_summary(const std::string& out_dir) {
  const std::string path = out_dir + "/summary.json";
  std::ifstream is(path);
  if (!is) throw std::runtime_error("no runs found: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("summary parse error in " + path + ": " + e.what());
  }
  GridSummary s;
  s.manifest = parse_manifest(j.at("manifest"));
  for (const auto& cj : j.at("configs")) {
    ConfigSummary cs;
    cs.config_id = cj.at("config_id").get<int>();
    cs.config = s.manifest.hyper;
    cs.config.apply_config_id(cs.config_id);
    cs.config = cs.config.resolved();
    cs.n_ok = cj.at("n_ok").get<int>();
    cs.n_failed = cj.at("n_failed").get<int>();
    cs.mean_f1_minority = cj.at("mean_f1_minority").get<double>();
    cs.std_f1_minority = cj.at("std_f1_minority").get<double>();
    cs.mean_f1_majority = cj.at("mean_f1_majority").get<double>();
    cs.std_f1_majority = cj.at("std_f1_majority").get<double>();
    cs.mean_ece = cj.at("mean_ece").get<double>();
    cs.mean_brier = cj.at("mean_brier").get<double>();
    cs.mean_confidence = cj.at("mean_confidence").get<double>();
    cs.best_epoch_mode = cj.at("best_epoch_mode").get<int>();
    s.configs.push_back(std::move(cs));
  }
  for (const auto& r : j.at("ranking")) s.ranking.push_back(r.get<int>());
  return s;
}

namespace {

std::string flag_cols(const TrainConfig& c) {
  std::string s;
  for (bool b : {c.bn_final, c.weighted_loss, c.data_augment, c.mixup, c.unfreeze_bn,
                 c.weight_decay}) {
    s += b ? "1," : "0,";
  }
  return s;
}

const ConfigSummary* find_config(const GridSummary& s, int id) {
  for (const ConfigSummary& cs : s.configs)
    if (cs.config_id == id) return &cs;
  return nullptr;
}

}  // namespace

std::string best_worst_csv(const GridSummary& summary, int k) {
  if (summary.configs.empty()) throw std::invalid_argument("empty grid summary");
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  const int n = static_cast<int>(summary.ranking.size());
  const int kk = std::min(k, n);

  std::string out =
      "kind,rank,config_id,bn,wl,da,mx,uf,wd,mean_f1_minority,std_f1_minority,mean_f1_majority,"
      "best_epoch_mode\n";
  auto emit = [&](const char* kind, int rank, int config_id) {
    const ConfigSummary* cs = find_config(summary, config_id);
    out += kind;
    out += "," + std::to_string(rank) + "," + std::to_string(config_id) + ",";
    out += flag_cols(cs->config);
    out += fmt(cs->mean_f1_minority) + "," + fmt(cs->std_f1_minority) + "," +
           fmt(cs->mean_f1_majority) + "," + std::to_string(cs->best_epoch_mode) + "\n";
  };
  for (int i = 0; i < kk; ++i) emit("best", i + 1, summary.ranking[static_cast<std::size_t>(i)]);
  for (int i = 0; i < kk; ++i)
    emit("worst", i + 1, summary.ranking[static_cast<std::size_t>(n - 1 - i)]);

  // The pattern reported in the source tables: every best row uses the final
  // BN layer and no worst row does. Annotated, never enforced.
  bool best_all_bn = true, worst_none_bn = true;
  for (int i = 0; i < kk; ++i) {
    if ((summary.ranking[static_cast<std::size_t>(i)] & 32) == 0) best_all_bn = false;
    if ((summary.ranking[static_cast<std::size_t>(n - 1 - i)] & 32) != 0) worst_none_bn = false;
  }
  if (n > kk) {
    out += (best_all_bn && worst_none_bn)
               ? "# note: final-BN flag separates best from worst rows\n"
               : "# note: final-BN flag does NOT cleanly separate best from worst rows\n";
  }
  return out;
}

std::string three_way_csv(const GridSummary& summary) {
  const ConfigSummary* base = find_config(summary, 0);
  const ConfigSummary* wl = find_config(summary, 16);
  const ConfigSummary* bn = find_config(summary, 32);
  if (!base || !wl || !bn) {
    throw std::runtime_error("three-way table needs configs 0, 16 and 32 in the grid output");
  }
  std::string out =
      "class,without_final_bn,with_wl_no_bn,with_final_bn_no_wl,bn_total_improvement\n";
  out += "unhealthy," + fmt(base->mean_f1_minority) + "," + fmt(wl->mean_f1_minority) + "," +
         fmt(bn->mean_f1_minority) + "," + fmt(bn->mean_f1_minority - wl->mean_f1_minority) +
         "\n";
  out += "healthy," + fmt(base->mean_f1_majority) + "," + fmt(wl->mean_f1_majority) + "," +
         fmt(bn->mean_f1_majority) + "," + fmt(bn->mean_f1_majority - wl->mean_f1_majority) +
         "\n";
  return out;
}

namespace {

std::vector<TraceRow> load_trace(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("no runs found: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trace file " + path);
  std::vector<TraceRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c)) {
      throw std::runtime_error("malformed trace row in " + path);
    }
    rows.push_back(TraceRow{std::stoll(a), std::stoi(b), std::stod(c)});
  }
  return rows;
}

}  // namespace

std::string confident_wrongs_csv(const std::string& out_dir, int config_without, int config_with,
                                 int repeat) {
  auto minority_sorted = [&](int config_id) {
    const std::string path = out_dir + "/" + std::to_string(config_id) + "/" +
                             std::to_string(repeat) + "/trace.csv";
    std::vector<double> p;
    for (const TraceRow& r : load_trace(path))
      if (r.ground_truth == 1) p.push_back(r.p_class1);
    std::sort(p.begin(), p.end());
    return p;
  };
  const std::vector<double> lhs = minority_sorted(config_without);
  const std::vector<double> rhs = minority_sorted(config_with);
  std::string out = "rank,p_class1_without_final_bn,p_class1_with_final_bn\n";
  const std::size_t n = std::max(lhs.size(), rhs.size());
  for (std::size_t i = 0; i < n; ++i) {
    out += std::to_string(i + 1) + ",";
    out += i < lhs.size() ? fmt(lhs[i]) : "";
    out += ",";
    out += i < rhs.size() ? fmt(rhs[i]) : "";
    out += "\n";
  }
  return out;
}

}  // namespace fnbn
