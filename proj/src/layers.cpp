#include "layers.hpp"

#include <cmath>
#include <stdexcept>

namespace fnbn {

BatchNorm::BatchNorm(std::size_t features, double epsilon, double momentum)
    : gamma(Tensor::full({features}, 1.0)),
      beta(Tensor({features})),
      running_mean(Tensor({features})),
      running_var(Tensor::full({features}, 1.0)),
      grad_gamma(Tensor({features})),
      grad_beta(Tensor({features})),
      epsilon(epsilon),
      momentum(momentum) {
  if (epsilon <= 0.0) throw std::invalid_argument("batchnorm epsilon must be positive");
  if (momentum <= 0.0 || momentum >= 1.0)
    throw std::invalid_argument("batchnorm momentum must lie in (0,1)");
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  if (x.rank() != 2 || x.dim(1) != features()) {
    throw std::invalid_argument("batchnorm input " + shape_string(x) + " does not match " +
                                std::to_string(features()) + " features");
  }
  ensure_finite(x, "batchnorm_forward input");
  const std::size_t m = x.dim(0), d = features();
  const bool batch_stats = (mode == Mode::kTrain) && !frozen;
  if (mode == Mode::kTrain && m < 2) {
    throw std::invalid_argument("batchnorm train mode needs a batch of at least 2, got " +
                                std::to_string(m));
  }
  if (m < 1) throw std::invalid_argument("batchnorm on empty batch");

  Tensor mean({d}), var({d});
  if (batch_stats) {
    Moments mo = reduce_stats(x);
    mean = std::move(mo.mean);
    var = std::move(mo.var);
    for (std::size_t j = 0; j < d; ++j) {
      running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mean[j];
      running_var[j] = (1.0 - momentum) * running_var[j] + momentum * var[j];
    }
  } else {
    mean = running_mean;
    var = running_var;
  }

  inv_std_ = Tensor({d});
  for (std::size_t j = 0; j < d; ++j) inv_std_[j] = 1.0 / std::sqrt(var[j] + epsilon);

  x_hat_ = Tensor({m, d});
  Tensor out({m, d});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (x(i, j) - mean[j]) * inv_std_[j];
      x_hat_(i, j) = xh;
      out(i, j) = gamma[j] * xh + beta[j];
    }
  }
  used_batch_stats_ = batch_stats;
  has_cache_ = true;
  nchw_shape_.clear();
  return out;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
  if (!has_cache_) throw std::logic_error("batchnorm_backward without prior forward");
  if (!grad_out.same_shape(x_hat_)) {
    throw std::invalid_argument("batchnorm grad " + shape_string(grad_out) +
                                " does not match cached forward " + shape_string(x_hat_));
  }
  const std::size_t m = x_hat_.dim(0), d = x_hat_.dim(1);
  grad_gamma.fill(0.0);
  grad_beta.fill(0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      grad_beta[j] += grad_out(i, j);
      grad_gamma[j] += grad_out(i, j) * x_hat_(i, j);
    }
  }

  Tensor grad_in({m, d});
  if (!used_batch_stats_) {
    // Running statistics are constants wrt the input.
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j)
        grad_in(i, j) = grad_out(i, j) * gamma[j] * inv_std_[j];
    return grad_in;
  }

  // Batch statistics: route gradients through mu_B and var_B.
  // grad_in = (gamma * inv_std / m) * (m*g - sum(g) - x_hat * sum(g*x_hat))
  for (std::size_t j = 0; j < d; ++j) {
    const double sum_g = grad_beta[j];
    const double sum_gx = grad_gamma[j];
    const double scale = gamma[j] * inv_std_[j] / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      grad_in(i, j) =
          scale * (static_cast<double>(m) * grad_out(i, j) - sum_g - x_hat_(i, j) * sum_gx);
    }
  }
  return grad_in;
}

namespace {

Tensor nchw_to_rows(const Tensor& x) {
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor rows({b * h * w, c});
  std::size_t r = 0;
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j, ++r)
        for (std::size_t ci = 0; ci < c; ++ci) rows(r, ci) = x(bi, ci, i, j);
  return rows;
}

Tensor rows_to_nchw(const Tensor& rows, const std::vector<std::size_t>& shape) {
  const std::size_t b = shape[0], c = shape[1], h = shape[2], w = shape[3];
  Tensor x(shape);
  std::size_t r = 0;
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j, ++r)
        for (std::size_t ci = 0; ci < c; ++ci) x(bi, ci, i, j) = rows(r, ci);
  return x;
}

}  // namespace

Tensor BatchNorm::forward_nchw(const Tensor& x, Mode mode) {
  if (x.rank() != 4) {
    throw std::invalid_argument("batchnorm nchw expects rank-4 input, got " + shape_string(x));
  }
  std::vector<std::size_t> shape = x.shape();
  Tensor out_rows = forward(nchw_to_rows(x), mode);
  nchw_shape_ = shape;
  return rows_to_nchw(out_rows, shape);
}

Tensor BatchNorm::backward_nchw(const Tensor& grad_out) {
  if (nchw_shape_.empty() || grad_out.shape() != nchw_shape_) {
    throw std::invalid_argument("batchnorm nchw grad does not match cached forward");
  }
  Tensor grad_rows = backward(nchw_to_rows(grad_out));
  return rows_to_nchw(grad_rows, nchw_shape_);
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Dense::Dense(std::size_t in, std::size_t out, Rng& rng)
    : weight(Tensor({in, out})),
      bias(Tensor({out})),
      grad_weight(Tensor({in, out})),
      grad_bias(Tensor({out})) {
  const double b = glorot_bound(in, out);
  std::uniform_real_distribution<double> dist(-b, b);
  for (double& v : weight.values()) v = dist(rng);
}

Tensor Dense::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != weight.dim(0)) {
    throw std::invalid_argument("dense input " + shape_string(x) + " does not match weight " +
                                shape_string(weight));
  }
  input_ = x;
  Tensor out = matmul(x, weight);
  const std::size_t m = out.dim(0), n = out.dim(1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += bias[j];
  return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
  if (input_.rank() != 2) throw std::logic_error("dense backward without prior forward");
  const std::size_t m = input_.dim(0), in = weight.dim(0), out = weight.dim(1);
  if (grad_out.rank() != 2 || grad_out.dim(0) != m || grad_out.dim(1) != out) {
    throw std::invalid_argument("dense grad " + shape_string(grad_out) +
                                " does not match cached forward");
  }
  grad_weight.fill(0.0);
  grad_bias.fill(0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < out; ++j) grad_bias[j] += grad_out(i, j);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < in; ++p) {
      const double xv = input_(i, p);
      for (std::size_t j = 0; j < out; ++j) grad_weight(p, j) += xv * grad_out(i, j);
    }
  Tensor grad_in({m, in});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < out; ++j) {
      const double g = grad_out(i, j);
      for (std::size_t p = 0; p < in; ++p) grad_in(i, p) += g * weight(p, j);
    }
  return grad_in;
}

Conv2d::Conv2d(std::size_t cin, std::size_t cout, std::size_t k, Rng& rng)
    : kernel(Tensor({cout, cin, k, k})),
      bias(Tensor({cout})),
      grad_kernel(Tensor({cout, cin, k, k})),
      grad_bias(Tensor({cout})) {
  const std::size_t fan_in = cin * k * k, fan_out = cout * k * k;
  const double b = glorot_bound(fan_in, fan_out);
  std::uniform_real_distribution<double> dist(-b, b);
  for (double& v : kernel.values()) v = dist(rng);
}

Tensor Conv2d::forward(const Tensor& x) {
  input_ = x;
  return conv2d_forward(x, kernel, bias);
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             std::size_t h, std::size_t w) {
  const std::size_t batch = grad_out.dim(0), cout = grad_out.dim(1);
  const std::size_t oh = grad_out.dim(2), ow = grad_out.dim(3);
  const std::size_t cin = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  Tensor grad_in({batch, cin, h, w});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double g = grad_out(b, o, i, j);
          if (g == 0.0) continue;
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) grad_in(b, c, i + u, j + v) += g * kernel(o, c, u, v);
        }
  return grad_in;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  if (input_.rank() != 4) throw std::logic_error("conv2d backward without prior forward");
  const std::size_t batch = input_.dim(0), cin = input_.dim(1);
  const std::size_t h = input_.dim(2), w = input_.dim(3);
  const std::size_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  if (grad_out.rank() != 4 || grad_out.dim(0) != batch || grad_out.dim(1) != cout ||
      grad_out.dim(2) != oh || grad_out.dim(3) != ow) {
    throw std::invalid_argument("conv2d grad " + shape_string(grad_out) +
                                " does not match cached forward");
  }
  grad_kernel.fill(0.0);
  grad_bias.fill(0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double g = grad_out(b, o, i, j);
          grad_bias[o] += g;
          if (g == 0.0) continue;
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) grad_kernel(o, c, u, v) += g * input_(b, c, i + u, j + v);
        }
  return conv2d_backward_input(grad_out, kernel, h, w);
}

Tensor Relu::forward(const Tensor& x) {
  input_ = x;
  Tensor out = x;
  for (double& v : out.values())
    if (v < 0.0) v = 0.0;
  return out;
}

Tensor Relu::backward(const Tensor& grad_out) const {
  if (!grad_out.same_shape(input_)) {
    throw std::invalid_argument("relu grad does not match cached forward");
  }
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i)
    if (input_[i] <= 0.0) grad_in[i] = 0.0;
  return grad_in;
}

Dropout::Dropout(double rate) : rate(rate) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must lie in [0,1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng) {
  if (mode == Mode::kEval || rate == 0.0) {
    identity_ = true;
    return x;
  }
  identity_ = false;
  const double keep = 1.0 - rate;
  std::bernoulli_distribution coin(keep);
  mask_ = Tensor(x.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = coin(rng) ? 1.0 / keep : 0.0;
    mask_[i] = m;
    out[i] *= m;
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_out) const {
  if (identity_) return grad_out;
  if (!grad_out.same_shape(mask_)) {
    throw std::invalid_argument("dropout grad does not match cached forward");
  }
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] *= mask_[i];
  return grad_in;
}

Tensor AdaptiveAvgPool::forward(const Tensor& x) {
  if (x.rank() != 4) {
    throw std::invalid_argument("adaptive_avg_pool expects rank-4 input, got " + shape_string(x));
  }
  in_shape_ = x.shape();
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const double denom = static_cast<double>(h * w);
  Tensor out({b, c});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) acc += x(bi, ci, i, j);
      out(bi, ci) = acc / denom;
    }
  return out;
}

Tensor AdaptiveAvgPool::backward(const Tensor& grad_out) const {
  if (in_shape_.empty()) throw std::logic_error("adaptive_avg_pool backward without forward");
  const std::size_t b = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  if (grad_out.rank() != 2 || grad_out.dim(0) != b || grad_out.dim(1) != c) {
    throw std::invalid_argument("adaptive_avg_pool grad does not match cached forward");
  }
  const double denom = static_cast<double>(h * w);
  Tensor grad_in(in_shape_);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double g = grad_out(bi, ci) / denom;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) grad_in(bi, ci, i, j) = g;
    }
  return grad_in;
}

}  // namespace fnbn
