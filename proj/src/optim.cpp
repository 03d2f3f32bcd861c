#include "mtiqa/optim.hpp"

#include <cmath>
#include <numbers>

#include "mtiqa/errors.hpp"

namespace mtiqa {

OptimizerState init_optimizer(std::span<const ParameterPtr> params, const AdamWConfig& config) {
  OptimizerState state;
  state.config = config;
  for (const auto& p : params) {
    state.m.emplace_back(p->value.shape());
    state.v.emplace_back(p->value.shape());
  }
  return state;
}

void adamw_step(std::span<const ParameterPtr> params, OptimizerState& state, double lr) {
  if (params.size() != state.m.size()) {
    throw ShapeError("optimizer state holds " + std::to_string(state.m.size()) + " moments for " +
                     std::to_string(params.size()) + " parameters");
  }
  const AdamWConfig& c = state.config;
  state.t += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.requires_grad) continue;
    if (p.grad.shape() != p.value.shape() || state.m[i].shape() != p.value.shape()) {
      throw ShapeError("optimizer shape mismatch for parameter '" + p.name + "': value " +
                       to_string(p.value.shape()) + ", grad " + to_string(p.grad.shape()) + ", moment " +
                       to_string(state.m[i].shape()));
    }
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p.value[k] -= lr * c.weight_decay * p.value[k] + lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

double lr_at(std::size_t step, std::size_t total_steps, double base_lr) {
  if (total_steps == 0) throw ConfigError("lr_at: total_steps must be positive");
  if (step > total_steps) throw ConfigError("lr_at: step exceeds total_steps");
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace mtiqa
