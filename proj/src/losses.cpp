#include "mtiqa/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mtiqa/errors.hpp"

namespace mtiqa {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double thurstone(double qx, double qy) { return normal_cdf((qx - qy) / std::numbers::sqrt2); }

double fidelity(double p, double phat) {
  return 1.0 - std::sqrt(p * phat) - std::sqrt((1.0 - p) * (1.0 - phat));
}

double scene_loss(std::uint16_t targets, const std::vector<double>& m_s, SceneLoss variant) {
  if (targets == 0) throw DataError("scene_loss: empty target set");
  const std::size_t n = m_s.size();
  double count = 0.0;
  for (std::size_t s = 0; s < n; ++s) count += (targets >> s) & 1u;
  if (variant == SceneLoss::kBinary) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) acc += fidelity((targets >> s) & 1u ? 1.0 : 0.0, m_s[s]);
    return acc / static_cast<double>(n);
  }
  double bc = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    if ((targets >> s) & 1u) bc += std::sqrt(m_s[s] / count);
  }
  return 1.0 - bc;
}

double distortion_loss(std::size_t target, const std::vector<double>& m_d) {
  if (target >= m_d.size()) throw std::out_of_range("distortion_loss: target out of range");
  return 1.0 - std::sqrt(m_d[target]);
}

NodeId quality_loss_node(Graph& g, NodeId scores, std::size_t batch, const std::vector<ImagePair>& pairs) {
  if (pairs.empty()) throw DataError("quality loss needs at least one pair");
  // Row k of P gives z_k = s_k (q_x - q_y) / sqrt(2) with s_k = +1 when the
  // label is 1 and -1 otherwise, so the fidelity term is 1 - sqrt(Phi(z_k))
  // in both cases.
  Tensor p({pairs.size(), batch});
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double s = (pairs[k].label > 0.5 ? 1.0 : -1.0) / std::numbers::sqrt2;
    p.at(k, pairs[k].x) += s;
    p.at(k, pairs[k].y) -= s;
  }
  NodeId z = g.matmul(g.constant(std::move(p)), g.reshape(scores, {batch, 1}));
  NodeId terms = g.rsub_scalar(1.0, g.sqrt(g.normal_cdf(z)));
  return g.mean_all(terms);
}

NodeId scene_loss_node(Graph& g, NodeId m_s, const std::vector<std::uint16_t>& targets, std::size_t num_scenes,
                       SceneLoss variant) {
  const std::size_t b = targets.size();
  if (variant == SceneLoss::kBinary) {
    // sqrt(t*m + (1-t)(1-m)) = sqrt((2t-1) m + (1-t)) for t in {0,1}.
    Tensor slope({b, num_scenes});
    Tensor shift({b, num_scenes});
    for (std::size_t i = 0; i < b; ++i) {
      if (targets[i] == 0) throw DataError("scene loss: empty target set for batch image " + std::to_string(i));
      for (std::size_t s = 0; s < num_scenes; ++s) {
        const bool on = (targets[i] >> s) & 1u;
        slope.at(i, s) = on ? 1.0 : -1.0;
        shift.at(i, s) = on ? 0.0 : 1.0;
      }
    }
    NodeId agree = g.add(g.mul(m_s, g.constant(std::move(slope))), g.constant(std::move(shift)));
    NodeId per_image = g.rsub_scalar(1.0, g.mean(g.sqrt(agree), 1));
    return g.mean_all(per_image);
  }
  Tensor weight({b, num_scenes});
  for (std::size_t i = 0; i < b; ++i) {
    if (targets[i] == 0) throw DataError("scene loss: empty target set for batch image " + std::to_string(i));
    double count = 0.0;
    for (std::size_t s = 0; s < num_scenes; ++s) count += (targets[i] >> s) & 1u;
    for (std::size_t s = 0; s < num_scenes; ++s) {
      weight.at(i, s) = ((targets[i] >> s) & 1u) ? std::sqrt(1.0 / count) : 0.0;
    }
  }
  NodeId bc = g.sum(g.mul(g.sqrt(m_s), g.constant(std::move(weight))), 1);
  return g.mean_all(g.rsub_scalar(1.0, bc));
}

NodeId distortion_loss_node(Graph& g, NodeId m_d, const std::vector<std::uint8_t>& targets,
                            std::size_t num_distortions) {
  Tensor onehot({targets.size(), num_distortions});
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= num_distortions) throw DataError("distortion target out of range");
    onehot.at(i, targets[i]) = 1.0;
  }
  NodeId picked = g.sum(g.mul(m_d, g.constant(std::move(onehot))), 1);
  return g.mean_all(g.rsub_scalar(1.0, g.sqrt(picked)));
}

LossNodes build_losses(Graph& g, NodeId scores, NodeId m_s, NodeId m_d, const std::vector<const ImageRecord*>& batch,
                       const std::vector<ImagePair>& pairs, const TaskSet& tasks, const std::array<double, 3>& lambda,
                       SceneLoss scene_variant, std::size_t num_scenes, std::size_t num_distortions) {
  LossNodes out;
  std::vector<NodeId> weighted;
  if (tasks[0]) {
    out.task[0] = quality_loss_node(g, scores, batch.size(), pairs);
    out.present[0] = true;
  }
  if (tasks[1]) {
    std::vector<std::uint16_t> t;
    for (const auto* r : batch) t.push_back(r->scene_mask);
    out.task[1] = scene_loss_node(g, m_s, t, num_scenes, scene_variant);
    out.present[1] = true;
  }
  if (tasks[2]) {
    std::vector<std::uint8_t> t;
    for (const auto* r : batch) t.push_back(r->distortion);
    out.task[2] = distortion_loss_node(g, m_d, t, num_distortions);
    out.present[2] = true;
  }
  NodeId total{};
  bool any = false;
  for (std::size_t j = 0; j < 3; ++j) {
    if (!out.present[j]) continue;
    NodeId term = g.mul_scalar(out.task[j], lambda[j]);
    total = any ? g.add(total, term) : term;
    any = true;
  }
  if (!any) throw ConfigError("no task enabled");
  out.total = total;
  return out;
}

DwaState::DwaState(TaskSet enabled, Weighting weighting, double tau2, std::size_t window)
    : enabled_(enabled), weighting_(weighting), tau2_(tau2), window_(window) {
  std::size_t k = 0;
  for (bool e : enabled_) k += e;
  if (k == 0) throw ConfigError("at least one task must be enabled");
  if (weighting_ == Weighting::kDwa && k < 2) throw ConfigError("dynamic weighting requires at least two tasks");
  if (!(tau2_ > 0.0)) throw ConfigError("tau2 must be positive");
  set_uniform();
}

void DwaState::set_uniform() {
  std::size_t k = 0;
  for (bool e : enabled_) k += e;
  for (std::size_t j = 0; j < 3; ++j) lambda_[j] = enabled_[j] ? 1.0 / static_cast<double>(k) : 0.0;
}

void DwaState::record(const std::array<double, 3>& losses) { current_.push_back(losses); }

std::array<double, 3> DwaState::weights_from_ratios(const std::array<double, 3>& ratios, const TaskSet& enabled,
                                                    double tau2) {
  double mx = -INFINITY;
  for (std::size_t j = 0; j < 3; ++j) {
    if (enabled[j]) mx = std::max(mx, ratios[j] / tau2);
  }
  std::array<double, 3> w{};
  double z = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    if (!enabled[j]) continue;
    w[j] = std::exp(ratios[j] / tau2 - mx);
    z += w[j];
  }
  for (auto& x : w) x /= z;
  return w;
}

void DwaState::end_epoch() {
  std::array<double, 3> avg{};
  const std::size_t n = current_.size();
  const std::size_t start = (window_ > 0 && window_ < n) ? n - window_ : 0;
  for (std::size_t i = start; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) avg[j] += current_[i][j];
  }
  if (n > start) {
    for (auto& a : avg) a /= static_cast<double>(n - start);
  }
  history_.push_back(avg);
  current_.clear();

  if (weighting_ == Weighting::kEqual || history_.size() < 2) {
    set_uniform();
    return;
  }
  const auto& prev = history_[history_.size() - 2];
  const auto& last = history_.back();
  std::array<double, 3> ratios{};
  for (std::size_t j = 0; j < 3; ++j) {
    if (!enabled_[j]) continue;
    if (!(prev[j] > 0.0)) {
      throw NumericalError("dynamic weighting: non-positive average loss for task " + std::to_string(j) +
                           " two epochs back");
    }
    ratios[j] = last[j] / prev[j];
  }
  lambda_ = weights_from_ratios(ratios, enabled_, tau2_);
}

}  // namespace mtiqa
