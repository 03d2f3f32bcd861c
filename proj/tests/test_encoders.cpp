#include <gtest/gtest.h>

#include <random>

#include "mtiqa/datasets.hpp"
#include "mtiqa/encoders.hpp"
#include "mtiqa/gradcheck.hpp"

using namespace mtiqa;

namespace {

FeatureImage random_image(std::size_t g, std::size_t ch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  FeatureImage img{g, g, ch, std::vector<float>(g * g * ch)};
  for (auto& v : img.data) v = n(rng);
  return img;
}

Tensor run_images(const Model& model, const std::vector<const FeatureImage*>& imgs, const std::vector<CropSet>& crops) {
  Graph g;
  auto windows = g.constant(window_matrix(imgs, crops, model.config().window));
  auto f = model.encode_images(g, windows, imgs.size(), crops[0].crops.size());
  g.evaluate();
  return g.value(f);
}

}  // namespace

TEST(Crops, SinglePlacementWhenImageEqualsCrop) {
  auto img = random_image(6, 4, 1);
  auto cs = sample_crops(img, 5, 6, std::uint64_t{3});
  ASSERT_EQ(cs.crops.size(), 5u);
  for (const auto& c : cs.crops) EXPECT_EQ(c, (Crop{0, 0}));
}

TEST(Crops, SeededAndInRange) {
  auto img = random_image(8, 4, 1);
  auto a = sample_crops(img, 15, 6, std::uint64_t{42});
  auto b = sample_crops(img, 15, 6, std::uint64_t{42});
  EXPECT_EQ(a.crops, b.crops);
  for (const auto& c : a.crops) {
    EXPECT_LE(c.row, 2u);
    EXPECT_LE(c.col, 2u);
  }
}

TEST(Crops, WindowCount) {
  EXPECT_EQ(windows_per_crop(6, 2), 25u);
  EXPECT_EQ(windows_per_crop(6, 1), 36u);
}

TEST(ImageEncoder, ZeroFinalLayerGivesBias) {
  ModelConfig mc;
  Model model(mc, LabelSpace());
  model.parameter("image.out.w")->value.fill(0.0);
  auto& b = model.parameter("image.out.b")->value;
  for (std::size_t k = 0; k < b.size(); ++k) b[k] = 0.1 * static_cast<double>(k);
  auto img = random_image(8, 16, 2);
  std::vector<CropSet> crops{sample_crops(img, 3, 6, std::uint64_t{1})};
  auto f = run_images(model, {&img}, crops);
  ASSERT_EQ(f.shape(), (Shape{3, mc.embed_dim}));
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t k = 0; k < mc.embed_dim; ++k) EXPECT_EQ(f.at(u, k), b[k]);
}

TEST(ImageEncoder, CropPermutationPermutesRows) {
  Model model(ModelConfig{}, LabelSpace());
  auto img = random_image(8, 16, 3);
  auto cs = sample_crops(img, 4, 6, std::uint64_t{5});
  auto rev = cs;
  std::reverse(rev.crops.begin(), rev.crops.end());
  auto f = run_images(model, {&img}, {cs});
  auto r = run_images(model, {&img}, {rev});
  for (std::size_t u = 0; u < 4; ++u)
    for (std::size_t k = 0; k < f.shape()[1]; ++k) EXPECT_EQ(f.at(u, k), r.at(3 - u, k));
}

TEST(ImageEncoder, Deterministic) {
  Model a(ModelConfig{}, LabelSpace()), b(ModelConfig{}, LabelSpace());
  auto img = random_image(8, 16, 4);
  std::vector<CropSet> crops{sample_crops(img, 3, 6, std::uint64_t{1})};
  EXPECT_EQ(run_images(a, {&img}, crops), run_images(b, {&img}, crops));
}

TEST(ImageEncoder, MeanEmbeddingGradCheck) {
  ModelConfig mc;
  mc.hidden = 8;
  mc.embed_dim = 6;
  mc.channels = 4;
  Model model(mc, LabelSpace());
  auto img = random_image(8, 4, 5);
  std::vector<CropSet> crops{sample_crops(img, 2, 6, std::uint64_t{2})};
  Graph g;
  auto windows = g.constant(window_matrix({&img}, crops, mc.window));
  auto f = model.encode_images(g, windows, 1, 2);
  std::mt19937_64 rng(1);
  Tensor w({2, mc.embed_dim});
  for (auto& v : w.data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  auto seed = g.sum_all(g.mul(f, g.constant(w)));
  auto report = grad_check(g, seed, {}, {.tolerance = 1e-5});
  EXPECT_TRUE(report.pass) << report.max_rel_error;
}

TEST(TextEncoder, DescriptionCounts) {
  Model m5(ModelConfig{}, LabelSpace(5));
  EXPECT_EQ(m5.num_descriptions(), 495u);
  ModelConfig binary;
  binary.quality_levels = 2;
  Model m2(binary, LabelSpace(2));
  EXPECT_EQ(m2.num_descriptions(), 198u);
  ModelConfig sep;
  sep.separate_templates = true;
  Model ms(sep, LabelSpace());
  EXPECT_EQ(ms.num_descriptions(), 25u);
}

TEST(TextEncoder, RowsFollowTokens) {
  Model model(ModelConfig{}, LabelSpace());
  Graph g;
  auto t = model.encode_texts(g);
  g.evaluate();
  const auto& G = g.value(t);
  ASSERT_EQ(G.shape(), (Shape{495, 32}));
  // Rows differ only through their tokens, so descriptions that share every
  // token multiset map to the same row; distinct ones here do not collide.
  const auto& avg = model.token_average();
  for (std::size_t v = 1; v < 495; ++v) {
    bool same_tokens = true;
    for (std::size_t k = 0; k < avg.shape()[1]; ++k) same_tokens &= avg.at(v, k) == avg.at(0, k);
    EXPECT_FALSE(same_tokens);
  }
  // Identical token sequences give identical rows.
  Tensor twice({2, avg.shape()[1]});
  for (std::size_t k = 0; k < avg.shape()[1]; ++k) twice.at(0, k) = twice.at(1, k) = avg.at(7, k);
  Graph h;
  auto e = h.matmul(h.constant(twice), h.parameter(model.parameter("text.embed")));
  auto proj = h.add(h.matmul(e, h.parameter(model.parameter("text.proj.w"))), h.parameter(model.parameter("text.proj.b")));
  h.evaluate();
  for (std::size_t k = 0; k < 32; ++k) {
    EXPECT_EQ(h.value(proj).at(0, k), h.value(proj).at(1, k));
    EXPECT_NEAR(h.value(proj).at(0, k), G.at(7, k), 1e-14);
  }
}

TEST(TextEncoder, FrozenFlag) {
  ModelConfig mc;
  mc.freeze_text_encoder = true;
  Model model(mc, LabelSpace());
  for (const auto& name : model.text_parameter_names()) EXPECT_FALSE(model.parameter(name)->requires_grad) << name;
  EXPECT_TRUE(model.parameter("image.stem.w")->requires_grad);
}

TEST(Model, TemperatureInit) {
  Model model(ModelConfig{}, LabelSpace());
  EXPECT_NEAR(model.log_tau(), std::log(0.07), 1e-15);
}
