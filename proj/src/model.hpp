#pragma once

#include <string>
#include <vector>

#include "layers.hpp"

namespace fnbn {

// Small trainable CNN trunk followed by the classifier head
//   AAP -> BN -> Dropout -> Dense -> ReLU -> BN -> Dropout -> Dense [-> BN]
// where the trailing BN over the two logits is the final-BN switch.
struct ModelSpec {
  bool final_bn = false;
  int hidden_size = 32;
  int image_size = 16;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int kernel_size = 3;
  int num_classes = 2;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;
  double dropout1 = 0.25;
  double dropout2 = 0.5;
  bool final_bn_learnable = true;
  // UF flag inverse: freeze the trunk BN layers (normalize with running
  // statistics, no updates). Head BNs and the final BN stay trainable.
  bool freeze_trunk_bn = true;
};

enum class ParamKind { kWeight, kBias, kBnGamma, kBnBeta };

struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
  ParamKind kind;
  bool trainable;
};

class Model {
 public:
  Model(const ModelSpec& spec, std::uint64_t init_seed);

  // x is [m x 1 x s x s]; returns logits [m x num_classes]. Train mode draws
  // dropout masks from `rng` and requires m >= 2 (BN precondition).
  Tensor forward(const Tensor& x, Mode mode, Rng& rng);
  // Gradient of the loss wrt the input; parameter gradients are left in the
  // layers' grad buffers.
  Tensor backward(const Tensor& grad_logits);

  // Learnable parameters in architecture order. Pointers are invalidated by
  // copying the model.
  std::vector<ParamRef> params();
  // Parameter and state tensors in checkpoint order (BN layers contribute
  // gamma, beta, running_mean, running_var).
  std::vector<Tensor*> state_tensors();
  std::vector<const Tensor*> state_tensors() const;

  void save_params(const std::string& path) const;
  void load_params(const std::string& path);

  const ModelSpec& spec() const { return spec_; }

  // Layers in architecture order.
  Conv2d conv1;
  BatchNorm bn_c1;
  Conv2d conv2;
  BatchNorm bn_c2;
  BatchNorm bn_h1;
  Dropout drop1;
  Dense fc1;
  BatchNorm bn_h2;
  Dropout drop2;
  Dense fc2;
  BatchNorm bn_final;

 private:
  Model(const ModelSpec& spec, Rng rng);

  ModelSpec spec_;
  Relu relu_c1_, relu_c2_, relu_h_;
  AdaptiveAvgPool pool_;
};

// Parameter checkpoint file: magic "FNBN0001", then for each state tensor in
// order: u32 LE rank, rank x u32 LE dims, then f64 LE values row-major.
inline constexpr char kCheckpointMagic[8] = {'F', 'N', 'B', 'N', '0', '0', '0', '1'};

}  // namespace fnbn
