#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace fnbn {

// label 0 = healthy/majority, 1 = unhealthy/minority.
struct LabeledImage {
  std::int64_t id = 0;
  Tensor pixels;  // [1 x h x w], values in [0,1]
  int label = 0;
};

using Dataset = std::vector<LabeledImage>;

constexpr int kImageSize = 16;

// Class counts per split: (majority, minority).
struct SkewProtocol {
  std::array<std::int64_t, 2> train{1000, 10};
  std::array<std::int64_t, 2> val{150, 7};
  std::array<std::int64_t, 2> test{150, 150};

  std::int64_t majority_total() const { return train[0] + val[0] + test[0]; }
  std::int64_t minority_total() const { return train[1] + val[1] + test[1]; }
};

// Majority images are a smooth two-sinusoid background plus Gaussian noise
// (sigma 0.05), clipped to [0,1]; minority images additionally carry one
// low-contrast circular lesion (radius 2-3 px, amplitude +0.15, random
// center). Majority images come first; ids are sequential.
Dataset generate_synthetic(std::int64_t n_majority, std::int64_t n_minority, std::uint64_t seed);

struct Splits {
  Dataset train, val, test;
};

// Uniform sampling without replacement per class per split; the three splits
// are disjoint by sample id.
Splits make_splits(const Dataset& majority_pool, const Dataset& minority_pool,
                   const SkewProtocol& protocol, std::uint64_t seed);

struct AugmentParams {
  bool hflip = false;
  bool vflip = false;
  int shift_x = 0;  // in {-2..2}, edge replication
  int shift_y = 0;
  double brightness = 1.0;  // in [0.9, 1.1], output re-clipped to [0,1]
};

AugmentParams draw_augment_params(Rng& rng);
LabeledImage augment_with(const LabeledImage& img, const AugmentParams& params);
LabeledImage augment(const LabeledImage& img, Rng& rng);

// Text dataset format: header "FND1,<h>,<w>,<count>", then one
// "<label>,<p_0>,...,<p_(h*w-1)>" line per image (row-major, values in
// [0,1]). UTF-8, LF line endings. Loaded ids are the 0-based row order.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

std::array<std::int64_t, 2> class_counts(const Dataset& ds);
Dataset filter_label(const Dataset& ds, int label);

}  // namespace fnbn
