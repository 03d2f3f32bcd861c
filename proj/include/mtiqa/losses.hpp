#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mtiqa/autograd.hpp"
#include "mtiqa/datasets.hpp"

namespace mtiqa {

enum class Task { kQuality = 0, kScene = 1, kDistortion = 2 };
using TaskSet = std::array<bool, 3>;  // indexed by Task

enum class SceneLoss { kBinary, kSoftmax };
enum class Weighting { kDwa, kEqual };

double normal_cdf(double x);

/// Phi((qx - qy) / sqrt(2)).
double thurstone(double qx, double qy);

/// 1 - sqrt(p * phat) - sqrt((1-p)(1-phat)).
double fidelity(double p, double phat);

/// Scene fidelity against a non-empty target set (bitmask over scenes).
double scene_loss(std::uint16_t targets, const std::vector<double>& m_s, SceneLoss variant);

/// 1 - sqrt(m_d[target]).
double distortion_loss(std::size_t target, const std::vector<double>& m_d);

/// Per-task loss nodes for one training step. Each is a scalar mean over
/// pairs (quality) or images (scene, distortion); unset when the task is
/// disabled.
struct LossNodes {
  std::array<NodeId, 3> task{};
  std::array<bool, 3> present{false, false, false};
  NodeId total{};
};

/// Pairwise fidelity over the Thurstone probabilities of `pairs`, mean.
NodeId quality_loss_node(Graph& g, NodeId scores, std::size_t batch, const std::vector<ImagePair>& pairs);
NodeId scene_loss_node(Graph& g, NodeId m_s, const std::vector<std::uint16_t>& targets, std::size_t num_scenes,
                       SceneLoss variant);
NodeId distortion_loss_node(Graph& g, NodeId m_d, const std::vector<std::uint8_t>& targets,
                            std::size_t num_distortions);

/// lambda_q * mean_pairs(l_q) + mean_batch(lambda_s l_s + lambda_d l_d).
/// Disabled tasks contribute nothing and are never built.
LossNodes build_losses(Graph& g, NodeId scores, NodeId m_s, NodeId m_d, const std::vector<const ImageRecord*>& batch,
                       const std::vector<ImagePair>& pairs, const TaskSet& tasks, const std::array<double, 3>& lambda,
                       SceneLoss scene_variant, std::size_t num_scenes, std::size_t num_distortions);

/// Per-epoch task weighting. The first two epochs use uniform weights over
/// the enabled tasks; afterwards w_j = l_j(t-1) / l_j(t-2) and
/// lambda = softmax(w / tau2). Epoch averages are taken over the last
/// `window` iterations of the epoch (0 = all of them).
class DwaState {
 public:
  DwaState(TaskSet enabled, Weighting weighting, double tau2, std::size_t window = 0);

  const std::array<double, 3>& lambda() const { return lambda_; }
  void record(const std::array<double, 3>& losses);
  /// Closes the epoch, pushes its averages, recomputes lambda for the next.
  void end_epoch();
  const std::vector<std::array<double, 3>>& history() const { return history_; }

  /// Softmax of ratios over enabled tasks (zeros elsewhere).
  static std::array<double, 3> weights_from_ratios(const std::array<double, 3>& ratios, const TaskSet& enabled,
                                                   double tau2);

 private:
  void set_uniform();

  TaskSet enabled_;
  Weighting weighting_;
  double tau2_;
  std::size_t window_;
  std::vector<std::array<double, 3>> current_;
  std::vector<std::array<double, 3>> history_;
  std::array<double, 3> lambda_{};
};

}  // namespace mtiqa
