#include "mtiqa/correspondence.hpp"

#include <algorithm>
#include <cmath>

#include "mtiqa/encoders.hpp"
#include "mtiqa/errors.hpp"

namespace mtiqa {

JointDistribution::JointDistribution(const LabelSpace& labels, std::vector<double> joint)
    : joint_(std::move(joint)),
      mc_(labels.num_quality(), 0.0),
      ms_(labels.num_scenes(), 0.0),
      md_(labels.num_distortions(), 0.0) {
  if (joint_.size() != labels.size()) {
    throw ShapeError("joint distribution has " + std::to_string(joint_.size()) + " entries, label space " +
                     std::to_string(labels.size()));
  }
  for (std::size_t v = 0; v < joint_.size(); ++v) {
    const Triple t = labels.unflatten(v);
    mc_[t.c] += joint_[v];
    ms_[t.s] += joint_[v];
    md_[t.d] += joint_[v];
  }
}

std::vector<double> correspondence_logits(const Tensor& f, const Tensor& g) {
  if (f.rank() != 2 || g.rank() != 2 || f.shape()[1] != g.shape()[1]) {
    throw ShapeError("logits: expected F [U,K] and G [V,K], got " + to_string(f.shape()) + " and " +
                     to_string(g.shape()));
  }
  const std::size_t u = f.shape()[0];
  const std::size_t v = g.shape()[0];
  const std::size_t k = f.shape()[1];
  auto norms = [k](const Tensor& t, const char* what) {
    std::vector<double> n(t.shape()[0]);
    for (std::size_t r = 0; r < n.size(); ++r) {
      double ss = 0.0;
      for (std::size_t c = 0; c < k; ++c) ss += t.at(r, c) * t.at(r, c);
      n[r] = std::sqrt(ss);
      if (!(n[r] > 0.0)) throw NumericalError(std::string("logits: zero-norm ") + what + " row " + std::to_string(r));
    }
    return n;
  };
  const auto nf = norms(f, "image embedding");
  const auto ng = norms(g, "text embedding");
  std::vector<double> out(v, 0.0);
  for (std::size_t j = 0; j < v; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u; ++i) {
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += f.at(i, c) * g.at(j, c);
      acc += dot / (nf[i] * ng[j]);
    }
    out[j] = acc / static_cast<double>(u);
  }
  return out;
}

JointDistribution joint_distribution(const LabelSpace& labels, const std::vector<double>& logits, double tau) {
  if (!(tau > 0.0)) throw NumericalError("temperature must be positive");
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / tau);
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return JointDistribution(labels, std::move(p));
}

double quality_score(const std::vector<double>& m_c) {
  double q = 0.0;
  for (std::size_t c = 0; c < m_c.size(); ++c) q += static_cast<double>(c + 1) * m_c[c];
  return q;
}

std::size_t argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

LabelPrediction predict_labels(const std::vector<double>& m_c, const std::vector<double>& m_s,
                               const std::vector<double>& m_d) {
  return {argmax(m_s), argmax(m_d), argmax(m_c)};
}

LabelPrediction predict_labels(const JointDistribution& jd) {
  return predict_labels(jd.quality(), jd.scene(), jd.distortion());
}

HeadNodes build_head(Graph& g, const Model& model, NodeId windows, std::size_t batch, std::size_t crops) {
  const LabelSpace& labels = model.labels();
  const std::size_t nc = labels.num_quality();
  const std::size_t ns = labels.num_scenes();
  const std::size_t nd = labels.num_distortions();
  NodeId f = model.encode_images(g, windows, batch, crops);

  HeadNodes out;
  if (model.config().linear_head) {
    NodeId per_crop = g.add(g.matmul(f, g.parameter(model.parameter("head.w"))),
                            g.parameter(model.parameter("head.b")));
    out.score = g.mean(g.reshape(per_crop, {batch, crops}), 1);
    out.quality_marginal = out.scene_marginal = out.distortion_marginal = out.score;
    out.has_marginals = false;
    return out;
  }

  NodeId text = model.encode_texts(g);
  const std::size_t v = model.num_descriptions();
  NodeId cos = g.matmul(g.l2_normalize(f, 1), g.transpose(g.l2_normalize(text, 1)));  // [B*U, V]
  NodeId logits = g.mean(g.reshape(cos, {batch, crops, v}), 1);                     // [B, V]
  NodeId inv_tau = g.exp(g.neg(g.parameter(model.parameter("log_tau"))));
  NodeId scaled = g.mul(logits, inv_tau);

  if (model.config().separate_templates) {
    out.scene_marginal = g.softmax(g.slice(scaled, 1, 0, ns), 1);
    out.distortion_marginal = g.softmax(g.slice(scaled, 1, ns, ns + nd), 1);
    out.quality_marginal = g.softmax(g.slice(scaled, 1, ns + nd, ns + nd + nc), 1);
  } else {
    NodeId joint = g.reshape(g.softmax(scaled, 1), {batch, ns, nd, nc});
    out.quality_marginal = g.sum(g.sum(joint, 1), 1);
    out.scene_marginal = g.sum(g.sum(joint, 3), 2);
    out.distortion_marginal = g.sum(g.sum(joint, 3), 1);
  }
  Tensor levels({nc, 1});
  for (std::size_t c = 0; c < nc; ++c) levels[c] = static_cast<double>(c + 1);
  out.score = g.reshape(g.matmul(out.quality_marginal, g.constant(std::move(levels))), {batch});
  return out;
}

}  // namespace mtiqa
