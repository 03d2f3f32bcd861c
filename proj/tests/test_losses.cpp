#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mtiqa/correspondence.hpp"
#include "mtiqa/errors.hpp"
#include "mtiqa/gradcheck.hpp"
#include "mtiqa/losses.hpp"

using namespace mtiqa;

TEST(Thurstone, Examples) {
  EXPECT_DOUBLE_EQ(thurstone(2.0, 2.0), 0.5);
  // Phi(1/sqrt 2) to 10 digits.
  EXPECT_NEAR(thurstone(4.0, 3.0), 0.7602499389, 1e-10);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    double a = u(rng), b = u(rng);
    EXPECT_NEAR(thurstone(a, b) + thurstone(b, a), 1.0, 1e-12);
  }
}

TEST(Fidelity, Examples) {
  EXPECT_EQ(fidelity(1.0, 1.0), 0.0);
  EXPECT_EQ(fidelity(0.0, 0.0), 0.0);
  EXPECT_NEAR(fidelity(1.0, 0.5), 0.2928932188, 1e-10);
  EXPECT_DOUBLE_EQ(fidelity(0.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(fidelity(1.0, 0.0), 1.0);
  for (double p : {0.0, 0.3, 1.0})
    for (double q : {0.1, 0.5, 0.9}) EXPECT_NEAR(fidelity(p, q), fidelity(1 - p, 1 - q), 1e-15);
}

TEST(SceneLoss, Examples) {
  std::vector<double> onehot(9, 0.0);
  onehot[3] = 1.0;
  EXPECT_DOUBLE_EQ(scene_loss(1u << 3, onehot, SceneLoss::kBinary), 0.0);

  std::vector<double> uniform(9, 1.0 / 9.0);
  const double expect = ((1 - std::sqrt(1.0 / 9)) + 8 * (1 - std::sqrt(8.0 / 9))) / 9.0;
  EXPECT_NEAR(scene_loss(1u << 2, uniform, SceneLoss::kBinary), expect, 1e-15);
  // The closed form evaluates to 0.124910...; a quoted 0.0784 for the same
  // expression does not match it.
  EXPECT_NEAR(expect, 0.1249104816, 1e-10);

  std::vector<double> two(9, 0.0);
  two[1] = two[6] = 0.5;
  EXPECT_NEAR(scene_loss((1u << 1) | (1u << 6), two, SceneLoss::kSoftmax), 0.0, 1e-15);
  EXPECT_THROW(scene_loss(0, uniform, SceneLoss::kBinary), DataError);
}

TEST(DistortionLoss, Examples) {
  std::vector<double> onehot(11, 0.0);
  onehot[4] = 1.0;
  EXPECT_EQ(distortion_loss(4, onehot), 0.0);
  EXPECT_NEAR(distortion_loss(7, std::vector<double>(11, 1.0 / 11)), 1 - std::sqrt(1.0 / 11), 1e-15);
  EXPECT_NEAR(1 - std::sqrt(1.0 / 11), 0.69849, 5e-6);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> m(11);
    double s = 0;
    for (auto& v : m) s += v = std::uniform_real_distribution<double>()(rng);
    for (auto& v : m) v /= s;
    double l = distortion_loss(i % 11, m);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 1.0);
  }
}

namespace {

struct ToyBatch {
  std::vector<ImageRecord> recs;
  std::vector<const ImageRecord*> ptrs;
  std::vector<ImagePair> pairs;
};

ToyBatch toy_batch(std::size_t n, std::uint64_t seed) {
  ToyBatch b;
  std::mt19937_64 rng(seed);
  b.recs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    b.recs[i].mos = std::uniform_real_distribution<double>(1, 5)(rng);
    b.recs[i].scene_mask = static_cast<std::uint16_t>((1u << (rng() % 9)) | (i % 2 ? 1u << (rng() % 9) : 0u));
    b.recs[i].distortion = static_cast<std::uint8_t>(rng() % 11);
  }
  for (auto& r : b.recs) b.ptrs.push_back(&r);
  b.pairs = make_pairs(b.ptrs);
  return b;
}

Tensor random_simplex_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < cols; ++c) s += t.at(r, c) = std::uniform_real_distribution<double>(0.05, 1)(rng);
    for (std::size_t c = 0; c < cols; ++c) t.at(r, c) /= s;
  }
  return t;
}

}  // namespace

TEST(TotalLoss, MatchesScalarRecomputation) {
  for (auto variant : {SceneLoss::kBinary, SceneLoss::kSoftmax}) {
    auto b = toy_batch(2, 3);
    std::mt19937_64 rng(4);
    Tensor scores({2}, {3.4, 2.1});
    auto ms = random_simplex_rows(2, 9, rng);
    auto md = random_simplex_rows(2, 11, rng);
    std::array<double, 3> lambda{0.5, 0.3, 0.2};
    Graph g;
    auto nodes = build_losses(g, g.constant(scores), g.constant(ms), g.constant(md), b.ptrs, b.pairs,
                              {true, true, true}, lambda, variant, 9, 11);
    g.evaluate();
    ASSERT_EQ(b.pairs.size(), 1u);
    const auto& pr = b.pairs[0];
    double lq = fidelity(pr.label, thurstone(scores[pr.x], scores[pr.y]));
    double ls = 0, ld = 0;
    for (std::size_t i = 0; i < 2; ++i) {
      std::vector<double> s(ms.data().begin() + i * 9, ms.data().begin() + (i + 1) * 9);
      std::vector<double> d(md.data().begin() + i * 11, md.data().begin() + (i + 1) * 11);
      ls += scene_loss(b.recs[i].scene_mask, s, variant) / 2;
      ld += distortion_loss(b.recs[i].distortion, d) / 2;
    }
    EXPECT_NEAR(g.value(nodes.task[0]).item(), lq, 1e-14);
    EXPECT_NEAR(g.value(nodes.task[1]).item(), ls, 1e-14);
    EXPECT_NEAR(g.value(nodes.task[2]).item(), ld, 1e-14);
    EXPECT_NEAR(g.value(nodes.total).item(), 0.5 * lq + 0.3 * ls + 0.2 * ld, 1e-14);
  }
}

TEST(TotalLoss, ZeroWhenEverythingAgrees) {
  auto b = toy_batch(2, 5);
  b.recs[0].mos = 4.0;
  b.recs[1].mos = 2.0;
  b.pairs = make_pairs(b.ptrs);
  b.recs[0].scene_mask = 1u << 2;
  b.recs[1].scene_mask = 1u << 5;
  Tensor ms({2, 9}, 0.0), md({2, 11}, 0.0);
  ms.at(0, 2) = ms.at(1, 5) = 1.0;
  md.at(0, b.recs[0].distortion) = md.at(1, b.recs[1].distortion) = 1.0;
  Graph g;
  // A huge score gap drives the Thurstone probability to 1 in double precision.
  auto nodes = build_losses(g, g.constant(Tensor({2}, {100.0, -100.0})), g.constant(ms), g.constant(md), b.ptrs,
                            b.pairs, {true, true, true}, {0.3, 0.3, 0.4}, SceneLoss::kBinary, 9, 11);
  g.evaluate();
  EXPECT_EQ(g.value(nodes.total).item(), 0.0);
}

TEST(TotalLoss, DisabledTasksAreNotBuilt) {
  auto b = toy_batch(4, 6);
  std::mt19937_64 rng(1);
  Graph g;
  auto nodes = build_losses(g, g.constant(Tensor({4}, {1, 2, 3, 4})), g.constant(random_simplex_rows(4, 9, rng)),
                            g.constant(random_simplex_rows(4, 11, rng)), b.ptrs, b.pairs, {true, false, false},
                            {1.0, 0.0, 0.0}, SceneLoss::kBinary, 9, 11);
  EXPECT_FALSE(nodes.present[1]);
  EXPECT_FALSE(nodes.present[2]);
  g.evaluate();
  EXPECT_EQ(g.value(nodes.total).item(), g.value(nodes.task[0]).item());
  EXPECT_THROW(build_losses(g, g.constant(Tensor({4})), g.constant(Tensor({4, 9})), g.constant(Tensor({4, 11})),
                            b.ptrs, {}, {true, true, true}, {0.3, 0.3, 0.4}, SceneLoss::kBinary, 9, 11),
               DataError);
}

TEST(TotalLoss, GradCheckThroughMarginals) {
  auto b = toy_batch(4, 8);
  std::mt19937_64 rng(9);
  auto logits = std::make_shared<Parameter>("logits", Tensor({4, 5, 9, 11}));
  for (auto& v : logits->value.data()) v = std::normal_distribution<double>()(rng);
  Graph g;
  auto flat = g.reshape(g.parameter(logits), {4, 495});
  auto joint = g.reshape(g.softmax(flat, 1), {4, 5, 9, 11});
  auto mc = g.sum(g.sum(joint, 3), 2);
  auto ms = g.sum(g.sum(joint, 3), 1);
  auto md = g.sum(g.sum(joint, 2), 1);
  Tensor levels({5}, {1, 2, 3, 4, 5});
  auto q = g.sum(g.mul(mc, g.constant(levels)), 1);
  auto nodes = build_losses(g, q, ms, md, b.ptrs, b.pairs, {true, true, true}, {0.2, 0.5, 0.3}, SceneLoss::kBinary,
                            9, 11);
  auto report = grad_check(g, nodes.total);
  EXPECT_TRUE(report.pass) << report.max_rel_error;
}

TEST(Dwa, Examples) {
  TaskSet all{true, true, true};
  auto eq = DwaState::weights_from_ratios({1, 1, 1}, all, 2.0);
  for (double v : eq) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  auto w = DwaState::weights_from_ratios({1.0, 1.1, 0.9}, all, 2.0);
  EXPECT_NEAR(w[0], 0.3331, 5e-5);
  EXPECT_NEAR(w[1], 0.3501, 5e-5);
  EXPECT_NEAR(w[2], 0.3168, 5e-5);
  EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);
  auto flat = DwaState::weights_from_ratios({0.2, 5.0, 1.0}, all, 1e9);
  for (double v : flat) EXPECT_NEAR(v, 1.0 / 3.0, 1e-8);
  auto two = DwaState::weights_from_ratios({1.0, 7.0, 1.0}, {true, false, true}, 2.0);
  EXPECT_EQ(two[1], 0.0);
  EXPECT_NEAR(two[0], 0.5, 1e-15);
}

TEST(Dwa, EpochSchedule) {
  DwaState s({true, true, true}, Weighting::kDwa, 2.0);
  for (double v : s.lambda()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  s.record({0.4, 0.2, 0.6});
  s.end_epoch();
  for (double v : s.lambda()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);  // still uniform in epoch 2
  s.record({0.2, 0.2, 0.3});
  s.end_epoch();
  auto expect = DwaState::weights_from_ratios({0.5, 1.0, 0.5}, {true, true, true}, 2.0);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(s.lambda()[j], expect[j], 1e-15);

  DwaState bad({true, true, false}, Weighting::kDwa, 2.0);
  bad.record({0.0, 0.3, 0.0});
  bad.end_epoch();
  bad.record({0.1, 0.3, 0.0});
  EXPECT_THROW(bad.end_epoch(), NumericalError);

  DwaState equal({true, false, true}, Weighting::kEqual, 2.0);
  equal.record({0.5, 0.0, 0.1});
  equal.end_epoch();
  equal.record({0.1, 0.0, 0.4});
  equal.end_epoch();
  EXPECT_EQ(equal.lambda(), (std::array<double, 3>{0.5, 0.0, 0.5}));
  EXPECT_THROW(DwaState({true, false, false}, Weighting::kDwa, 2.0), ConfigError);
}
