#pragma once

#include <string>
#include <vector>

#include "model.hpp"

namespace fnbn {

enum class Schedule { kConstant, kOneCycle, kStep };

Schedule schedule_from_string(const std::string& s);
std::string schedule_to_string(Schedule s);

struct OptimConfig {
  double base_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0;  // lambda; 0 disables decay
  Schedule schedule = Schedule::kOneCycle;
  int epochs = 10;
  int batch_size = 32;
};

// Learning rate for a given position in the run. `step` is the global step
// index in [0, total_steps); `epoch` is used by the step schedule.
//   constant:  base_lr
//   step:      base_lr * 0.1^floor(epoch/4)
//   one-cycle: linear warmup from base_lr/100 over the first 30% of steps,
//              then cosine decay down to base_lr/100 at the final step.
double lr_at(Schedule schedule, double base_lr, int epoch, long step, long total_steps);

// SGD with momentum and decoupled-from-scale L2 weight decay:
//   v <- momentum * v + grad + lambda * param   (decay on weights only)
//   param <- param - lr * v
// Frozen/non-trainable parameters are skipped entirely. Velocity slots are
// keyed by position in the params list, which is stable for a given model.
class Sgd {
 public:
  Sgd(double momentum, double weight_decay);

  void step(std::vector<ParamRef>& params, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::vector<Tensor> velocity_;
};

}  // namespace fnbn
