#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtiqa/autograd.hpp"

namespace mtiqa {

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double h = 1e-5;
  // Relative error is |a-n| / max(|a|, |n|, floor); the floor keeps
  // vanishing gradients from turning roundoff into huge ratios.
  double floor = 1e-6;
  // 0 checks every entry; otherwise an evenly strided subset per parameter.
  std::size_t max_entries_per_param = 0;
};

/// Compares analytic gradients of the scalar `seed` against central
/// differences, for every parameter that requires grad. Parameter grads
/// are zeroed before and left holding the analytic values afterwards.
/// Throws NumericalError naming the first non-finite node.
GradCheckReport grad_check(Graph& graph, NodeId seed, const std::map<std::string, Tensor>& inputs = {},
                           const GradCheckOptions& options = {});

/// Throws NumericalError if any node value in an evaluated graph is not finite.
void check_finite(const Graph& graph);

}  // namespace mtiqa
