#pragma once

#include "rng.hpp"
#include "tensor.hpp"

namespace fnbn {

enum class Mode { kTrain, kEval };

// Batch normalization over the feature axis of [m x d]:
//   x_hat = (x - mu_B) / sqrt(var_B + eps),  y = gamma * x_hat + beta
// with biased batch variance (divisor m). Train mode updates running
// statistics as running <- (1 - momentum) * running + momentum * batch.
// A frozen layer normalizes with running statistics even in train mode and
// never has its state updated.
struct BatchNorm {
  Tensor gamma, beta;
  Tensor running_mean, running_var;
  Tensor grad_gamma, grad_beta;
  double epsilon = 1e-5;
  double momentum = 0.1;
  bool frozen = false;

  explicit BatchNorm(std::size_t features, double epsilon = 1e-5, double momentum = 0.1);

  Tensor forward(const Tensor& x, Mode mode);
  // Returns grad wrt input; fills grad_gamma/grad_beta. Requires a matching
  // prior forward call.
  Tensor backward(const Tensor& grad_out);

  // Per-channel wrapper for [batch x c x h x w] feature maps: rows are
  // (batch, y, x) positions, features are channels.
  Tensor forward_nchw(const Tensor& x, Mode mode);
  Tensor backward_nchw(const Tensor& grad_out);

  std::size_t features() const { return gamma.dim(0); }

 private:
  // forward cache
  Tensor x_hat_;
  Tensor inv_std_;  // [d], of whichever statistics normalized the batch
  bool used_batch_stats_ = false;
  bool has_cache_ = false;
  std::vector<std::size_t> nchw_shape_;
};

struct Dense {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
  Tensor grad_weight, grad_bias;

  Dense(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

 private:
  Tensor input_;
};

struct Conv2d {
  Tensor kernel;  // [cout x cin x kh x kw]
  Tensor bias;    // [cout]
  Tensor grad_kernel, grad_bias;

  Conv2d(std::size_t cin, std::size_t cout, std::size_t k, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

 private:
  Tensor input_;
};

struct Relu {
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor input_;
};

// Inverted dropout: train mode keeps units with probability (1 - rate) and
// scales them by 1/(1 - rate); eval mode is the identity.
struct Dropout {
  double rate = 0.0;

  explicit Dropout(double rate = 0.0);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor mask_;
  bool identity_ = true;
};

// Spatial mean pool [batch x c x h x w] -> [batch x c].
struct AdaptiveAvgPool {
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<std::size_t> in_shape_;
};

// Glorot-uniform bound for a weight tensor.
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             std::size_t h, std::size_t w);

}  // namespace fnbn
