#include "mtiqa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mtiqa/errors.hpp"

namespace mtiqa {

void check_finite(const Graph& graph) {
  for (std::uint32_t i = 0; i < graph.size(); ++i) {
    const Tensor& v = graph.value(NodeId{i});
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!std::isfinite(v[k])) {
        throw NumericalError("non-finite value at " + graph.describe(NodeId{i}) + ", entry " + std::to_string(k));
      }
    }
  }
}

GradCheckReport grad_check(Graph& graph, NodeId seed, const std::map<std::string, Tensor>& inputs,
                           const GradCheckOptions& options) {
  const auto params = graph.parameters();
  for (const auto& p : params) p->zero_grad();
  graph.evaluate(inputs);
  check_finite(graph);
  graph.backprop(seed);

  auto loss_at = [&]() {
    graph.evaluate(inputs);
    const double v = graph.value(seed).item();
    if (!std::isfinite(v)) check_finite(graph);
    return v;
  };

  GradCheckReport report;
  for (const auto& p : params) {
    if (!p->requires_grad) continue;
    ParamCheck pc;
    pc.name = p->name;
    const std::size_t n = p->value.size();
    std::size_t stride = 1;
    if (options.max_entries_per_param > 0 && n > options.max_entries_per_param) {
      stride = (n + options.max_entries_per_param - 1) / options.max_entries_per_param;
    }
    for (std::size_t k = 0; k < n; k += stride) {
      const double saved = p->value[k];
      p->value[k] = saved + options.h;
      const double up = loss_at();
      p->value[k] = saved - options.h;
      const double down = loss_at();
      p->value[k] = saved;
      const double numeric = (up - down) / (2.0 * options.h);
      const double analytic = p->grad[k];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > pc.max_rel_error || pc.checked == 0) {
        pc.max_rel_error = rel;
        pc.worst_index = k;
        pc.analytic = analytic;
        pc.numeric = numeric;
      }
      ++pc.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.params.push_back(std::move(pc));
  }
  graph.evaluate(inputs);
  report.pass = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace mtiqa
