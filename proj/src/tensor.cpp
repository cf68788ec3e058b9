#include "tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fnbn {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor dimension must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_product(shape_) != data_.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::string shape_string(const Tensor& t) { return shape_string(t.shape()); }

void ensure_finite(const Tensor& t, const char* context) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite value in ") + context);
    }
  }
}

void ensure_finite(double v, const char* context) {
  if (!std::isfinite(v)) {
    throw std::runtime_error(std::string("non-finite value in ") + context);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul expects rank-2 tensors, got " + shape_string(a) +
                                " and " + shape_string(b));
  }
  if (a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul inner dimensions disagree: " + shape_string(a) +
                                " vs " + shape_string(b));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      double* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  ensure_finite(out, "matmul");
  return out;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw std::invalid_argument("conv2d expects rank-4 input and kernel, got " +
                                shape_string(input) + " and " + shape_string(kernel));
  }
  const std::size_t batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw std::invalid_argument("conv2d channel mismatch: input " + shape_string(input) +
                                " vs kernel " + shape_string(kernel));
  }
  if (kh > h || kw > w) {
    throw std::invalid_argument("conv2d kernel " + shape_string(kernel) +
                                " larger than input " + shape_string(input));
  }
  if (bias.rank() != 1 || bias.dim(0) != cout) {
    throw std::invalid_argument("conv2d bias must be [cout], got " + shape_string(bias));
  }
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  Tensor out({batch, cout, oh, ow});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      const double bo = bias[o];
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = bo;
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t u = 0; u < kh; ++u) {
              const double* irow = &input(b, c, i + u, j);
              const double* krow = &kernel(o, c, u, 0);
              for (std::size_t v = 0; v < kw; ++v) acc += irow[v] * krow[v];
            }
          }
          out(b, o, i, j) = acc;
        }
      }
    }
  }
  ensure_finite(out, "conv2d_forward");
  return out;
}

Moments reduce_stats(const Tensor& x) {
  if (x.rank() != 2) {
    throw std::invalid_argument("reduce_stats expects rank-2 input, got " + shape_string(x));
  }
  const std::size_t m = x.dim(0), d = x.dim(1);
  if (m < 1) throw std::invalid_argument("reduce_stats on empty batch");
  Moments mo{Tensor({d}), Tensor({d})};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) mo.mean[j] += x(i, j);
  for (std::size_t j = 0; j < d; ++j) mo.mean[j] /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x(i, j) - mo.mean[j];
      mo.var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) mo.var[j] /= static_cast<double>(m);
  ensure_finite(mo.mean, "reduce_stats");
  ensure_finite(mo.var, "reduce_stats");
  return mo;
}

}  // namespace fnbn
