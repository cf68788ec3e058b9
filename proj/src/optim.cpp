#include "optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fnbn {

Schedule schedule_from_string(const std::string& s) {
  if (s == "constant") return Schedule::kConstant;
  if (s == "one-cycle") return Schedule::kOneCycle;
  if (s == "step") return Schedule::kStep;
  throw std::invalid_argument("unknown schedule '" + s + "' (constant|one-cycle|step)");
}

std::string schedule_to_string(Schedule s) {
  switch (s) {
    case Schedule::kConstant: return "constant";
    case Schedule::kOneCycle: return "one-cycle";
    case Schedule::kStep: return "step";
  }
  return "constant";
}

double lr_at(Schedule schedule, double base_lr, int epoch, long step, long total_steps) {
  if (step < 0 || step >= total_steps) {
    throw std::invalid_argument("lr_at step outside [0, total_steps)");
  }
  switch (schedule) {
    case Schedule::kConstant:
      return base_lr;
    case Schedule::kStep:
      return base_lr * std::pow(0.1, static_cast<double>(epoch / 4));
    case Schedule::kOneCycle: {
      const double floor_lr = base_lr / 100.0;
      const long warm = static_cast<long>(0.3 * static_cast<double>(total_steps));
      if (step < warm) {
        return floor_lr + (base_lr - floor_lr) * static_cast<double>(step + 1) /
                              static_cast<double>(warm);
      }
      const long span = total_steps - 1 - warm;
      if (span <= 0) return base_lr;
      const double u = static_cast<double>(step - warm) / static_cast<double>(span);
      return floor_lr + (base_lr - floor_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
    }
  }
  return base_lr;
}

Sgd::Sgd(double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("sgd momentum must lie in [0,1)");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be nonnegative");
}

void Sgd::step(std::vector<ParamRef>& params, double lr) {
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const ParamRef& p : params) velocity_.emplace_back(p.value->shape());
  }
  if (velocity_.size() != params.size()) {
    throw std::logic_error("sgd param list changed size between steps");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamRef& p = params[k];
    if (!p.trainable) continue;
    Tensor& v = velocity_[k];
    Tensor& val = *p.value;
    const Tensor& g = *p.grad;
    const bool decay = weight_decay_ > 0.0 && p.kind == ParamKind::kWeight;
    for (std::size_t i = 0; i < val.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw std::runtime_error("non-finite gradient for parameter " + p.name);
      }
      double upd = g[i];
      if (decay) upd += weight_decay_ * val[i];
      v[i] = momentum_ * v[i] + upd;
      val[i] -= lr * v[i];
    }
  }
}

}  // namespace fnbn
