#include "model.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fnbn {

namespace {

std::size_t positive(int v, const char* what) {
  if (v <= 0) throw std::invalid_argument(std::string(what) + " must be positive");
  return static_cast<std::size_t>(v);
}

}  // namespace

Model::Model(const ModelSpec& spec, std::uint64_t init_seed) : Model(spec, Rng(init_seed)) {}

Model::Model(const ModelSpec& spec, Rng rng)
    : conv1(1, positive(spec.conv1_channels, "conv1_channels"),
            positive(spec.kernel_size, "kernel_size"), rng),
      bn_c1(positive(spec.conv1_channels, "conv1_channels"), spec.bn_epsilon, spec.bn_momentum),
      conv2(positive(spec.conv1_channels, "conv1_channels"),
            positive(spec.conv2_channels, "conv2_channels"),
            positive(spec.kernel_size, "kernel_size"), rng),
      bn_c2(positive(spec.conv2_channels, "conv2_channels"), spec.bn_epsilon, spec.bn_momentum),
      bn_h1(positive(spec.conv2_channels, "conv2_channels"), spec.bn_epsilon, spec.bn_momentum),
      drop1(spec.dropout1),
      fc1(positive(spec.conv2_channels, "conv2_channels"),
          positive(spec.hidden_size, "hidden_size"), rng),
      bn_h2(positive(spec.hidden_size, "hidden_size"), spec.bn_epsilon, spec.bn_momentum),
      drop2(spec.dropout2),
      fc2(positive(spec.hidden_size, "hidden_size"), positive(spec.num_classes, "num_classes"),
          rng),
      bn_final(positive(spec.num_classes, "num_classes"), spec.bn_epsilon, spec.bn_momentum),
      spec_(spec) {
  bn_c1.frozen = spec.freeze_trunk_bn;
  bn_c2.frozen = spec.freeze_trunk_bn;
}

Tensor Model::forward(const Tensor& x, Mode mode, Rng& rng) {
  if (x.rank() != 4 || x.dim(1) != 1) {
    throw std::invalid_argument("model input must be [m x 1 x h x w], got " + shape_string(x));
  }
  if (mode == Mode::kTrain && x.dim(0) < 2) {
    throw std::invalid_argument("train-mode forward needs a batch of at least 2, got " +
                                std::to_string(x.dim(0)));
  }
  Tensor h = conv1.forward(x);
  h = bn_c1.forward_nchw(h, mode);
  h = relu_c1_.forward(h);
  h = conv2.forward(h);
  h = bn_c2.forward_nchw(h, mode);
  h = relu_c2_.forward(h);
  Tensor f = pool_.forward(h);
  f = bn_h1.forward(f, mode);
  f = drop1.forward(f, mode, rng);
  f = fc1.forward(f);
  f = relu_h_.forward(f);
  f = bn_h2.forward(f, mode);
  f = drop2.forward(f, mode, rng);
  f = fc2.forward(f);
  if (spec_.final_bn) f = bn_final.forward(f, mode);
  return f;
}

Tensor Model::backward(const Tensor& grad_logits) {
  Tensor g = grad_logits;
  if (spec_.final_bn) g = bn_final.backward(g);
  g = fc2.backward(g);
  g = drop2.backward(g);
  g = bn_h2.backward(g);
  g = relu_h_.backward(g);
  g = fc1.backward(g);
  g = drop1.backward(g);
  g = bn_h1.backward(g);
  g = pool_.backward(g);
  g = relu_c2_.backward(g);
  g = bn_c2.backward_nchw(g);
  g = conv2.backward(g);
  g = relu_c1_.backward(g);
  g = bn_c1.backward_nchw(g);
  g = conv1.backward(g);
  return g;
}

std::vector<ParamRef> Model::params() {
  std::vector<ParamRef> refs;
  auto add = [&refs](const std::string& name, Tensor& value, Tensor& grad, ParamKind kind,
                     bool trainable) {
    refs.push_back(ParamRef{name, &value, &grad, kind, trainable});
  };
  auto add_bn = [&](const std::string& name, BatchNorm& bn, bool trainable) {
    add(name + ".gamma", bn.gamma, bn.grad_gamma, ParamKind::kBnGamma, trainable);
    add(name + ".beta", bn.beta, bn.grad_beta, ParamKind::kBnBeta, trainable);
  };
  add("conv1.kernel", conv1.kernel, conv1.grad_kernel, ParamKind::kWeight, true);
  add("conv1.bias", conv1.bias, conv1.grad_bias, ParamKind::kBias, true);
  add_bn("bn_c1", bn_c1, !bn_c1.frozen);
  add("conv2.kernel", conv2.kernel, conv2.grad_kernel, ParamKind::kWeight, true);
  add("conv2.bias", conv2.bias, conv2.grad_bias, ParamKind::kBias, true);
  add_bn("bn_c2", bn_c2, !bn_c2.frozen);
  add_bn("bn_h1", bn_h1, true);
  add("fc1.weight", fc1.weight, fc1.grad_weight, ParamKind::kWeight, true);
  add("fc1.bias", fc1.bias, fc1.grad_bias, ParamKind::kBias, true);
  add_bn("bn_h2", bn_h2, true);
  add("fc2.weight", fc2.weight, fc2.grad_weight, ParamKind::kWeight, true);
  add("fc2.bias", fc2.bias, fc2.grad_bias, ParamKind::kBias, true);
  if (spec_.final_bn) add_bn("bn_final", bn_final, spec_.final_bn_learnable);
  return refs;
}

std::vector<Tensor*> Model::state_tensors() {
  std::vector<Tensor*> out;
  auto add_bn = [&out](BatchNorm& bn) {
    out.push_back(&bn.gamma);
    out.push_back(&bn.beta);
    out.push_back(&bn.running_mean);
    out.push_back(&bn.running_var);
  };
  out.push_back(&conv1.kernel);
  out.push_back(&conv1.bias);
  add_bn(bn_c1);
  out.push_back(&conv2.kernel);
  out.push_back(&conv2.bias);
  add_bn(bn_c2);
  add_bn(bn_h1);
  out.push_back(&fc1.weight);
  out.push_back(&fc1.bias);
  add_bn(bn_h2);
  out.push_back(&fc2.weight);
  out.push_back(&fc2.bias);
  if (spec_.final_bn) add_bn(bn_final);
  return out;
}

std::vector<const Tensor*> Model::state_tensors() const {
  auto mut = const_cast<Model*>(this)->state_tensors();
  return std::vector<const Tensor*>(mut.begin(), mut.end());
}

namespace {

void put_u32_le(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64_le(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
  os.write(b, 8);
}

double get_f64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void Model::save_params(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 8);
  for (const Tensor* t : state_tensors()) {
    put_u32_le(os, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) put_u32_le(os, static_cast<std::uint32_t>(d));
    for (double v : t->values()) put_f64_le(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

void Model::load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("bad checkpoint magic in " + path);
  }
  for (Tensor* t : state_tensors()) {
    const std::uint32_t rank = get_u32_le(is);
    if (!is || rank != t->rank()) {
      throw std::runtime_error("checkpoint rank mismatch in " + path);
    }
    for (std::size_t i = 0; i < rank; ++i) {
      const std::uint32_t d = get_u32_le(is);
      if (!is || d != t->dim(i)) {
        throw std::runtime_error("checkpoint dimension mismatch in " + path);
      }
    }
    for (double& v : t->values()) v = get_f64_le(is);
    if (!is) throw std::runtime_error("checkpoint truncated: " + path);
  }
  is.peek();
  if (!is.eof()) throw std::runtime_error("trailing bytes in checkpoint: " + path);
}

}  // namespace fnbn
