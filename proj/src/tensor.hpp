#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fnbn {

// Dense row-major tensor of 64-bit reals. Values are treated as immutable
// once an operation has produced them; layers mutate only buffers they own.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // rank-2 indexing
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  // rank-3 indexing (CHW)
  double& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  // rank-4 indexing (NCHW)
  double& operator()(std::size_t b, std::size_t c, std::size_t i, std::size_t j) {
    return data_[((b * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }
  double operator()(std::size_t b, std::size_t c, std::size_t i, std::size_t j) const {
    return data_[((b * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(double v);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);
std::string shape_string(const Tensor& t);

// Throws if any element is NaN or infinite; `context` names the operation.
void ensure_finite(const Tensor& t, const char* context);
void ensure_finite(double v, const char* context);

// Standard matrix product of rank-2 tensors [m x k] * [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Valid (no padding), stride-1 cross-correlation.
// input [batch x cin x h x w], kernel [cout x cin x kh x kw], bias [cout].
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias);

struct Moments {
  Tensor mean;  // [d]
  Tensor var;   // [d], biased (divisor m)
};

// Per-feature mean and biased variance over the batch axis of [m x d].
Moments reduce_stats(const Tensor& x);

}  // namespace fnbn
