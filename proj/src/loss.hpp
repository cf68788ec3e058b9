#pragma once

#include <array>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace fnbn {

// Shift-stable row-wise softmax of [m x c] logits.
Tensor softmax(const Tensor& logits);

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
};

// Class-weighted cross entropy, normalized by the total sample weight so the
// loss scale stays comparable across weighting schemes:
//   L = sum_i sw_i * (-sum_c y_ic log p_ic) / sum_i sw_i
// with sw_i = sum_c y_ic * class_weights[c]. Targets may be soft (mixup).
LossResult weighted_cross_entropy(const Tensor& logits, const Tensor& targets,
                                  const std::array<double, 2>& class_weights);
LossResult weighted_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                  const std::array<double, 2>& class_weights);

Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes);

struct MixupResult {
  Tensor x;
  Tensor y;
  double lambda = 1.0;
  std::vector<std::size_t> perm;
};

// x_tilde = lambda * x_i + (1-lambda) * x_perm(i), same for the labels.
MixupResult mixup_apply(const Tensor& x, const Tensor& y, double lambda,
                        const std::vector<std::size_t>& perm);

// Draws lambda ~ Beta(alpha, alpha) and a random batch permutation.
MixupResult mixup_batch(const Tensor& x, const Tensor& y, double alpha, Rng& rng);

}  // namespace fnbn
