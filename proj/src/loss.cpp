#include "loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fnbn {

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("softmax expects rank-2 logits, got " + shape_string(logits));
  }
  ensure_finite(logits, "softmax input");
  const std::size_t m = logits.dim(0), c = logits.dim(1);
  Tensor probs({m, c});
  for (std::size_t i = 0; i < m; ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(logits(i, j) - mx);
      probs(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < c; ++j) probs(i, j) /= sum;
  }
  return probs;
}

LossResult weighted_cross_entropy(const Tensor& logits, const Tensor& targets,
                                  const std::array<double, 2>& class_weights) {
  if (logits.rank() != 2 || logits.dim(1) != 2) {
    throw std::invalid_argument("weighted_cross_entropy expects [m x 2] logits, got " +
                                shape_string(logits));
  }
  if (!targets.same_shape(logits)) {
    throw std::invalid_argument("targets " + shape_string(targets) + " do not match logits " +
                                shape_string(logits));
  }
  if (class_weights[0] <= 0.0 || class_weights[1] <= 0.0) {
    throw std::invalid_argument("class weights must be strictly positive");
  }
  ensure_finite(logits, "weighted_cross_entropy logits");
  const std::size_t m = logits.dim(0);
  if (m == 0) throw std::invalid_argument("weighted_cross_entropy on empty batch");

  LossResult res;
  res.grad_logits = Tensor({m, 2});
  double total_weight = 0.0;
  double total_loss = 0.0;
  std::vector<double> sample_weight(m);
  for (std::size_t i = 0; i < m; ++i) {
    sample_weight[i] = targets(i, 0) * class_weights[0] + targets(i, 1) * class_weights[1];
    total_weight += sample_weight[i];
  }
  if (total_weight <= 0.0) throw std::invalid_argument("total sample weight must be positive");

  for (std::size_t i = 0; i < m; ++i) {
    const double z0 = logits(i, 0), z1 = logits(i, 1);
    const double mx = std::max(z0, z1);
    const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
    const double logp0 = z0 - lse, logp1 = z1 - lse;
    total_loss += sample_weight[i] * (-(targets(i, 0) * logp0 + targets(i, 1) * logp1));
    const double p0 = std::exp(logp0), p1 = std::exp(logp1);
    res.grad_logits(i, 0) = sample_weight[i] * (p0 - targets(i, 0)) / total_weight;
    res.grad_logits(i, 1) = sample_weight[i] * (p1 - targets(i, 1)) / total_weight;
  }
  res.loss = total_loss / total_weight;
  ensure_finite(res.loss, "weighted_cross_entropy loss");
  return res;
}

LossResult weighted_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                  const std::array<double, 2>& class_weights) {
  if (labels.size() != logits.dim(0)) {
    throw std::invalid_argument("label count does not match logit rows");
  }
  return weighted_cross_entropy(logits, one_hot(labels, 2), class_weights);
}

Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes) {
  Tensor y({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw std::invalid_argument("label " + std::to_string(l) + " out of range");
    }
    y(i, static_cast<std::size_t>(l)) = 1.0;
  }
  return y;
}

MixupResult mixup_apply(const Tensor& x, const Tensor& y, double lambda,
                        const std::vector<std::size_t>& perm) {
  const std::size_t m = x.dim(0);
  if (m < 2) throw std::invalid_argument("mixup needs a batch of at least 2");
  if (y.dim(0) != m || perm.size() != m) {
    throw std::invalid_argument("mixup batch sizes disagree");
  }
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("mixup lambda outside [0,1]");

  const std::size_t row = x.size() / m;
  const std::size_t yrow = y.size() / m;
  MixupResult res;
  res.lambda = lambda;
  res.perm = perm;
  res.x = Tensor(x.shape());
  res.y = Tensor(y.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = perm[i];
    if (j >= m) throw std::invalid_argument("mixup permutation index out of range");
    for (std::size_t k = 0; k < row; ++k)
      res.x[i * row + k] = lambda * x[i * row + k] + (1.0 - lambda) * x[j * row + k];
    for (std::size_t k = 0; k < yrow; ++k)
      res.y[i * yrow + k] = lambda * y[i * yrow + k] + (1.0 - lambda) * y[j * yrow + k];
  }
  return res;
}

MixupResult mixup_batch(const Tensor& x, const Tensor& y, double alpha, Rng& rng) {
  if (alpha <= 0.0) throw std::invalid_argument("mixup alpha must be positive");
  const std::size_t m = x.dim(0);
  if (m < 2) throw std::invalid_argument("mixup needs a batch of at least 2");
  const double lambda = beta_sample(alpha, rng);
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return mixup_apply(x, y, lambda, perm);
}

}  // namespace fnbn
