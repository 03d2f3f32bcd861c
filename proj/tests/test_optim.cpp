#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mtiqa/errors.hpp"
#include "mtiqa/optim.hpp"

using namespace mtiqa;

TEST(AdamW, ZeroGradZeroDecayLeavesParams) {
  auto w = std::make_shared<Parameter>("w", Tensor({3}, {1.0, -2.0, 0.5}));
  std::vector<ParameterPtr> ps{w};
  auto state = init_optimizer(ps, {.lr = 0.1, .weight_decay = 0.0});
  adamw_step(ps, state, 0.1);
  EXPECT_EQ(w->value, Tensor({3}, {1.0, -2.0, 0.5}));
  EXPECT_EQ(state.t, 1u);
}

TEST(AdamW, SquareStepIsBounded) {
  auto w = std::make_shared<Parameter>("w", Tensor::scalar(1.0));
  std::vector<ParameterPtr> ps{w};
  auto state = init_optimizer(ps, {.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .weight_decay = 0.0});
  w->grad[0] = 2.0;  // d/dw w^2
  adamw_step(ps, state, 0.1);
  EXPECT_LT(w->value.item(), 1.0);
  EXPECT_LE(1.0 - w->value.item(), 0.1 + 1e-12);
}

TEST(AdamW, DecoupledDecayOnly) {
  auto w = std::make_shared<Parameter>("w", Tensor::scalar(1.0));
  std::vector<ParameterPtr> ps{w};
  auto state = init_optimizer(ps, {.lr = 0.1, .weight_decay = 0.5});
  adamw_step(ps, state, 0.1);
  EXPECT_NEAR(w->value.item(), 0.95, 1e-15);
}

TEST(AdamW, FrozenParameterUntouched) {
  auto w = std::make_shared<Parameter>("w", Tensor::scalar(1.0), false);
  std::vector<ParameterPtr> ps{w};
  auto state = init_optimizer(ps, {.lr = 0.1, .weight_decay = 0.5});
  w->grad[0] = 3.0;
  adamw_step(ps, state, 0.1);
  EXPECT_EQ(w->value.item(), 1.0);
}

TEST(AdamW, ShapeMismatchIsError) {
  auto w = std::make_shared<Parameter>("w", Tensor({2}, 1.0));
  std::vector<ParameterPtr> ps{w};
  auto state = init_optimizer(ps, {});
  w->grad = Tensor({3}, 0.0);
  EXPECT_THROW(adamw_step(ps, state, 0.1), ShapeError);
}

TEST(CosineSchedule, Endpoints) {
  EXPECT_DOUBLE_EQ(lr_at(0, 100, 0.3), 0.3);
  EXPECT_NEAR(lr_at(100, 100, 0.3), 0.0, 1e-17);
  EXPECT_NEAR(lr_at(50, 100, 0.3), 0.15, 1e-15);
  double prev = lr_at(0, 37, 1.0);
  for (std::size_t s = 1; s <= 37; ++s) {
    double cur = lr_at(s, 37, 1.0);
    EXPECT_LE(cur, prev);
    prev = cur;
  }
  EXPECT_THROW(lr_at(0, 0, 0.1), ConfigError);
  EXPECT_THROW(lr_at(5, 4, 0.1), ConfigError);
}
