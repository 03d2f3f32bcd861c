#pragma once

#include <span>
#include <vector>

#include "mtiqa/autograd.hpp"

namespace mtiqa {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

/// Moments are kept per parameter, in the order the parameters were given
/// to `init_optimizer`. Frozen parameters (requires_grad == false) keep
/// their slot but are never touched.
struct OptimizerState {
  AdamWConfig config;
  std::size_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

OptimizerState init_optimizer(std::span<const ParameterPtr> params, const AdamWConfig& config);

/// One AdamW update at learning rate `lr` using each parameter's `grad`.
/// Decay is decoupled: w <- w - lr*wd*w - lr*mhat/(sqrt(vhat)+eps).
void adamw_step(std::span<const ParameterPtr> params, OptimizerState& state, double lr);

/// Cosine annealing from base_lr at step 0 to 0 at total_steps.
double lr_at(std::size_t step, std::size_t total_steps, double base_lr);

}  // namespace mtiqa
