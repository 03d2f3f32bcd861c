#pragma once

#include <vector>

#include "mtiqa/autograd.hpp"
#include "mtiqa/labels.hpp"

namespace mtiqa {

/// Probability vector over a label space's flat indices with marginals
/// computed by direct summation.
class JointDistribution {
 public:
  JointDistribution(const LabelSpace& labels, std::vector<double> joint);

  const std::vector<double>& joint() const { return joint_; }
  const std::vector<double>& quality() const { return mc_; }
  const std::vector<double>& scene() const { return ms_; }
  const std::vector<double>& distortion() const { return md_; }

 private:
  std::vector<double> joint_;
  std::vector<double> mc_;
  std::vector<double> ms_;
  std::vector<double> md_;
};

/// Mean over crops of cosine similarity between F rows [U,K] and G rows
/// [V,K]; throws NumericalError on a zero-norm row.
std::vector<double> correspondence_logits(const Tensor& f, const Tensor& g);

/// softmax(logits / tau) over the whole label space.
JointDistribution joint_distribution(const LabelSpace& labels, const std::vector<double>& logits, double tau);

/// sum_c c * m_c(c) with levels numbered from 1.
double quality_score(const std::vector<double>& m_c);

struct LabelPrediction {
  std::size_t scene = 0;
  std::size_t distortion = 0;
  std::size_t quality_level = 0;
};

/// First index of the maximum, per marginal.
std::size_t argmax(const std::vector<double>& p);
LabelPrediction predict_labels(const std::vector<double>& m_c, const std::vector<double>& m_s,
                               const std::vector<double>& m_d);
LabelPrediction predict_labels(const JointDistribution& jd);

/// Graph outputs of the correspondence head for a batch of B images.
struct HeadNodes {
  NodeId quality_marginal;     // [B, C]
  NodeId scene_marginal;       // [B, S]
  NodeId distortion_marginal;  // [B, D]
  NodeId score;                // [B]
  bool has_marginals = true;   // false for the regression-head ablation
};

class Model;

/// Builds image/text encoding, cosine logits averaged over crops, the
/// temperature softmax and the three marginals. With separate templates
/// each head gets its own softmax over its slice of the logits instead.
HeadNodes build_head(Graph& g, const Model& model, NodeId windows, std::size_t batch, std::size_t crops);

}  // namespace mtiqa
