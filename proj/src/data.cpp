#include "data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fnbn {

namespace {

constexpr double kNoiseSigma = 0.05;
constexpr double kLesionAmplitude = 0.15;

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

Tensor synth_image(Rng& rng, bool lesion) {
  const int s = kImageSize;
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // Two random-phase sinusoids on top of mid-gray.
  double amp[2], freq[2], theta[2], phase[2];
  for (int k = 0; k < 2; ++k) {
    amp[k] = 0.05 + 0.05 * u01(rng);
    freq[k] = 0.5 + 1.5 * u01(rng);
    theta[k] = std::numbers::pi * u01(rng);
    phase[k] = 2.0 * std::numbers::pi * u01(rng);
  }

  double cx = 0.0, cy = 0.0, radius = 0.0;
  if (lesion) {
    radius = 2.0 + u01(rng);
    cx = radius + (s - 1 - 2.0 * radius) * u01(rng);
    cy = radius + (s - 1 - 2.0 * radius) * u01(rng);
  }

  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  Tensor px({1, static_cast<std::size_t>(s), static_cast<std::size_t>(s)});
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      double v = 0.5;
      for (int k = 0; k < 2; ++k) {
        const double t = (x * std::cos(theta[k]) + y * std::sin(theta[k])) * freq[k] / s;
        v += amp[k] * std::sin(2.0 * std::numbers::pi * t + phase[k]);
      }
      if (lesion) {
        const double d = std::hypot(x - cx, y - cy);
        // 1-px soft edge so the disk is not aliasing-sharp
        v += kLesionAmplitude * std::min(1.0, std::max(0.0, radius + 0.5 - d));
      }
      v += noise(rng);
      px(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = clip01(v);
    }
  }
  return px;
}

std::string format_pixel(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset generate_synthetic(std::int64_t n_majority, std::int64_t n_minority, std::uint64_t seed) {
  if (n_majority < 0 || n_minority < 0) {
    throw std::invalid_argument("synthetic counts must be nonnegative");
  }
  Rng rng(seed);
  Dataset ds;
  ds.reserve(static_cast<std::size_t>(n_majority + n_minority));
  std::int64_t id = 0;
  for (std::int64_t i = 0; i < n_majority; ++i, ++id)
    ds.push_back(LabeledImage{id, synth_image(rng, false), 0});
  for (std::int64_t i = 0; i < n_minority; ++i, ++id)
    ds.push_back(LabeledImage{id, synth_image(rng, true), 1});
  return ds;
}

namespace {

// Take `counts` per split from a shuffled copy of one class pool.
std::array<Dataset, 3> draw_per_class(const Dataset& pool, const std::array<std::int64_t, 3>& counts,
                                      const char* class_name, Rng& rng) {
  const std::int64_t needed = counts[0] + counts[1] + counts[2];
  if (static_cast<std::int64_t>(pool.size()) < needed) {
    throw std::invalid_argument(std::string("insufficient ") + class_name + " pool: need " +
                                std::to_string(needed) + ", have " + std::to_string(pool.size()));
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::array<Dataset, 3> out;
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s) {
    for (std::int64_t i = 0; i < counts[s]; ++i) out[s].push_back(pool[order[pos++]]);
  }
  return out;
}

}  // namespace

Splits make_splits(const Dataset& majority_pool, const Dataset& minority_pool,
                   const SkewProtocol& protocol, std::uint64_t seed) {
  for (const LabeledImage& img : majority_pool)
    if (img.label != 0) throw std::invalid_argument("majority pool contains label != 0");
  for (const LabeledImage& img : minority_pool)
    if (img.label != 1) throw std::invalid_argument("minority pool contains label != 1");

  Rng rng(seed);
  auto maj = draw_per_class(majority_pool,
                            {protocol.train[0], protocol.val[0], protocol.test[0]}, "majority",
                            rng);
  auto min = draw_per_class(minority_pool,
                            {protocol.train[1], protocol.val[1], protocol.test[1]}, "minority",
                            rng);
  Splits sp;
  Dataset* outs[3] = {&sp.train, &sp.val, &sp.test};
  for (int s = 0; s < 3; ++s) {
    *outs[s] = std::move(maj[s]);
    outs[s]->insert(outs[s]->end(), min[s].begin(), min[s].end());
  }
  return sp;
}

AugmentParams draw_augment_params(Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> shift(-2, 2);
  std::uniform_real_distribution<double> bright(0.9, 1.1);
  AugmentParams p;
  p.hflip = coin(rng);
  p.vflip = coin(rng);
  p.shift_x = shift(rng);
  p.shift_y = shift(rng);
  p.brightness = bright(rng);
  return p;
}

LabeledImage augment_with(const LabeledImage& img, const AugmentParams& params) {
  const std::size_t h = img.pixels.dim(1), w = img.pixels.dim(2);
  LabeledImage out = img;
  auto clamp_idx = [](long v, std::size_t n) {
    return static_cast<std::size_t>(std::min<long>(static_cast<long>(n) - 1, std::max<long>(0, v)));
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t sx = params.hflip ? (w - 1 - x) : x;
      std::size_t sy = params.vflip ? (h - 1 - y) : y;
      // shift with edge replication
      sx = clamp_idx(static_cast<long>(sx) - params.shift_x, w);
      sy = clamp_idx(static_cast<long>(sy) - params.shift_y, h);
      const double v = img.pixels(0, sy, sx) * params.brightness;
      out.pixels(0, y, x) = std::min(1.0, std::max(0.0, v));
    }
  }
  return out;
}

LabeledImage augment(const LabeledImage& img, Rng& rng) {
  return augment_with(img, draw_augment_params(rng));
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::size_t h = kImageSize, w = kImageSize;
  if (!ds.empty()) {
    h = ds.front().pixels.dim(1);
    w = ds.front().pixels.dim(2);
  }
  std::ofstream os(path, std::ios::binary);  // binary: LF endings everywhere
  if (!os) throw std::runtime_error("cannot open dataset file for writing: " + path);
  os << "FND1," << h << "," << w << "," << ds.size() << "\n";
  for (const LabeledImage& img : ds) {
    if (img.pixels.dim(1) != h || img.pixels.dim(2) != w) {
      throw std::invalid_argument("mixed image sizes in dataset");
    }
    os << img.label;
    for (double v : img.pixels.values()) os << "," << format_pixel(v);
    os << "\n";
  }
  if (!os) throw std::runtime_error("dataset write failed: " + path);
}

namespace {

double parse_pixel(const std::string& field, std::size_t line_no) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                             ": bad pixel value '" + field + "'");
  }
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                             ": pixel " + field + " outside [0,1]");
  }
  return v;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("dataset parse error at line 1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::size_t h = 0, w = 0, count = 0;
  {
    std::istringstream hs(line);
    std::string magic, hf, wf, cf;
    if (!std::getline(hs, magic, ',') || magic != "FND1" || !std::getline(hs, hf, ',') ||
        !std::getline(hs, wf, ',') || !std::getline(hs, cf)) {
      throw std::runtime_error("dataset parse error at line 1: malformed FND1 header");
    }
    try {
      h = std::stoul(hf);
      w = std::stoul(wf);
      count = std::stoul(cf);
    } catch (const std::exception&) {
      throw std::runtime_error("dataset parse error at line 1: malformed FND1 header");
    }
    if (h == 0 || w == 0) {
      throw std::runtime_error("dataset parse error at line 1: image size must be positive");
    }
  }

  Dataset ds;
  ds.reserve(count);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    if (!std::getline(ls, field, ',')) {
      throw std::runtime_error("dataset parse error at line " + std::to_string(line_no));
    }
    int label;
    if (field == "0") label = 0;
    else if (field == "1") label = 1;
    else
      throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                               ": unknown label '" + field + "'");
    Tensor px({1, h, w});
    std::size_t n = 0;
    while (std::getline(ls, field, ',')) {
      if (n >= h * w) {
        throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                                 ": too many pixels");
      }
      px[n++] = parse_pixel(field, line_no);
    }
    if (n != h * w) {
      throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                               ": expected " + std::to_string(h * w) + " pixels, got " +
                               std::to_string(n));
    }
    ds.push_back(LabeledImage{static_cast<std::int64_t>(ds.size()), std::move(px), label});
  }
  if (ds.size() != count) {
    throw std::runtime_error("dataset parse error: header declares " + std::to_string(count) +
                             " rows, file has " + std::to_string(ds.size()));
  }
  return ds;
}

std::array<std::int64_t, 2> class_counts(const Dataset& ds) {
  std::array<std::int64_t, 2> c{0, 0};
  for (const LabeledImage& img : ds) c[static_cast<std::size_t>(img.label)]++;
  return c;
}

Dataset filter_label(const Dataset& ds, int label) {
  Dataset out;
  for (const LabeledImage& img : ds)
    if (img.label == label) out.push_back(img);
  return out;
}

}  // namespace fnbn
