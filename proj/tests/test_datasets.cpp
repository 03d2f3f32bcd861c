#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "mtiqa/errors.hpp"
#include "mtiqa/datasets.hpp"
#include "mtiqa/metrics.hpp"

using namespace mtiqa;
namespace fs = std::filesystem;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.references = 12;
  c.versions = 5;
  return c;
}

fs::path temp_path(const std::string& name) {
  auto dir = fs::temp_directory_path() / "mtiqa_test_datasets";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST(Generator, LatentQualityExamples) {
  EXPECT_DOUBLE_EQ(latent_quality(0.0, 1.5), 5.0);
  EXPECT_DOUBLE_EQ(latent_quality(0.5, 1.0), 3.0);
  EXPECT_DOUBLE_EQ(latent_quality(1.0, 2.0), 1.0);
}

TEST(Generator, PristineImagesAreOthersAtTopQuality) {
  auto c = small_config();
  c.sigma_obs = 0.0;
  c.scales = {{1.0, 0.0}};
  LabelSpace ls;
  auto sets = generate(c, ls);
  std::size_t pristine = 0;
  for (const auto& r : sets[0]) {
    // "others" versions are the undistorted references.
    EXPECT_EQ(r.severity == 0.0, r.distortion == ls.others_distortion());
    if (r.severity == 0.0) {
      ++pristine;
      EXPECT_DOUBLE_EQ(r.mos, 5.0);
    } else {
      EXPECT_GE(r.severity, c.min_severity);
    }
  }
  EXPECT_GT(pristine, 0u);
}

TEST(Generator, ShapesIdsAndScenes) {
  auto c = small_config();
  auto sets = generate(c, LabelSpace());
  ASSERT_EQ(sets.size(), 3u);
  for (std::size_t m = 0; m < sets.size(); ++m) {
    ASSERT_EQ(sets[m].size(), c.references * c.versions);
    std::set<std::uint32_t> ids;
    for (const auto& r : sets[m]) {
      EXPECT_EQ(r.dataset_id, m);
      EXPECT_EQ(r.features.height, c.grid);
      EXPECT_EQ(r.features.channels, c.channels);
      EXPECT_EQ(r.features.data.size(), c.grid * c.grid * c.channels);
      int scenes = std::popcount(r.scene_mask);
      EXPECT_GE(scenes, 1);
      EXPECT_LE(scenes, 2);
      EXPECT_LT(r.distortion, 11);
      for (float v : r.features.data) ASSERT_TRUE(std::isfinite(v));
      ids.insert(r.id);
    }
    EXPECT_EQ(ids.size(), sets[m].size());
  }
}

TEST(Generator, AffineScalePreservesRankOrder) {
  auto c = small_config();
  c.sigma_obs = 0.0;
  auto sets = generate(c, LabelSpace());
  for (const auto& set : sets) {
    std::vector<double> latent, mos;
    for (const auto& r : set) {
      latent.push_back(latent_quality(r.severity, c.gamma));
      mos.push_back(r.mos);
    }
    EXPECT_NEAR(srcc(latent, mos), 1.0, 1e-12);
  }
}

TEST(Generator, MosTracksSeverity) {
  GeneratorConfig c;
  c.num_datasets = 1;
  c.references = 100;
  c.versions = 10;
  c.sigma_obs = 0.1;
  auto sets = generate(c, LabelSpace());
  std::vector<double> clean, mos;
  for (const auto& r : sets[0]) {
    clean.push_back(1.0 - r.severity);
    mos.push_back(r.mos);
  }
  ASSERT_EQ(mos.size(), 1000u);
  EXPECT_GE(srcc(clean, mos), 0.95);
}

TEST(Generator, Deterministic) {
  auto c = small_config();
  EXPECT_EQ(generate(c, LabelSpace()), generate(c, LabelSpace()));
  auto d = c;
  d.seed = c.seed + 1;
  EXPECT_NE(generate(c, LabelSpace())[0], generate(d, LabelSpace())[0]);
}

TEST(Generator, DistortionsAreIdentityAtZeroSeverity) {
  GeneratorConfig c;
  auto basis = make_basis(c, 9);
  std::mt19937_64 rng(1);
  std::vector<double> grid(c.grid * c.grid * c.channels);
  std::normal_distribution<double> n;
  for (auto& v : grid) v = n(rng);
  for (std::size_t d = 0; d < 11; ++d) {
    auto copy = grid;
    apply_distortion(copy, c.grid, c.channels, d, 0.0, basis, rng);
    EXPECT_EQ(copy, grid) << "distortion " << d;
  }
}

TEST(Generator, RejectsBadConfig) {
  GeneratorConfig c;
  c.min_severity = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.num_datasets = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(DatasetFile, RoundTripAndByteIdentity) {
  auto c = small_config();
  auto sets = generate(c, LabelSpace());
  DatasetFile f{3, static_cast<std::uint32_t>(c.grid), static_cast<std::uint32_t>(c.channels), LabelSpace().hash(),
                sets[1]};
  auto p1 = temp_path("a.mtiqa");
  auto p2 = temp_path("b.mtiqa");
  write_dataset(p1, f);
  write_dataset(p2, f);
  EXPECT_EQ(slurp(p1), slurp(p2));
  EXPECT_EQ(slurp(p1).substr(0, 7), std::string("MTIQA1\0", 7));
  auto back = read_dataset(p1);
  EXPECT_EQ(back.num_datasets, 3u);
  EXPECT_EQ(back.label_hash, f.label_hash);
  EXPECT_EQ(back.records, f.records);
}

TEST(DatasetFile, CorruptionReportsOffset) {
  auto c = small_config();
  auto sets = generate(c, LabelSpace());
  DatasetFile f{3, static_cast<std::uint32_t>(c.grid), static_cast<std::uint32_t>(c.channels), LabelSpace().hash(),
                sets[0]};
  auto p = temp_path("corrupt.mtiqa");
  write_dataset(p, f);
  auto bytes = slurp(p);
  {
    std::ofstream o(p, std::ios::binary | std::ios::trunc);
    o.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  try {
    read_dataset(p);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
  }
  {
    std::ofstream o(p, std::ios::binary | std::ios::trunc);
    o << "NOTMAGIC";
  }
  EXPECT_THROW(read_dataset(p), DataError);
  EXPECT_THROW(read_dataset(temp_path("missing.mtiqa")), DataError);
}

TEST(Split, TenGroupsOfTen) {
  std::vector<ImageRecord> recs;
  for (std::uint32_t g = 0; g < 10; ++g)
    for (std::uint32_t k = 0; k < 10; ++k) recs.push_back({.id = g * 10 + k, .reference_id = g});
  auto s = split(recs, {0.7, 0.1, 0.2, 1});
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.val.size(), 10u);
  EXPECT_EQ(s.test.size(), 20u);
  auto groups = [](const std::vector<ImageRecord>& v) {
    std::set<std::uint32_t> out;
    for (const auto& r : v) out.insert(r.reference_id);
    return out;
  };
  auto tr = groups(s.train), va = groups(s.val), te = groups(s.test);
  for (auto gid : tr) {
    EXPECT_FALSE(va.count(gid));
    EXPECT_FALSE(te.count(gid));
  }
  for (auto gid : va) EXPECT_FALSE(te.count(gid));
}

TEST(Split, SeedsGiveDistinctPartitions) {
  std::vector<ImageRecord> recs;
  for (std::uint32_t g = 0; g < 20; ++g) recs.push_back({.id = g, .reference_id = g});
  std::set<std::vector<std::uint32_t>> partitions;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = split(recs, {0.7, 0.1, 0.2, seed});
    std::vector<std::uint32_t> key;
    for (const auto& r : s.test) key.push_back(r.reference_id);
    std::sort(key.begin(), key.end());
    partitions.insert(key);
  }
  EXPECT_EQ(partitions.size(), 10u);
}

TEST(Split, TooFewGroups) {
  std::vector<ImageRecord> recs{{.id = 0, .reference_id = 0}, {.id = 1, .reference_id = 1}};
  EXPECT_THROW(split(recs, {}), DataError);
}

TEST(BatchSampler, SizesAndNoRepeatsWithinPass) {
  BatchSampler s({40, 100}, {4, 16}, 3);
  std::set<std::size_t> seen0;
  for (int it = 0; it < 10; ++it) {
    auto b = s.next();
    ASSERT_EQ(b[0].size(), 4u);
    ASSERT_EQ(b[1].size(), 16u);
    for (auto i : b[0]) EXPECT_TRUE(seen0.insert(i).second) << "repeat at iteration " << it;
  }
  EXPECT_EQ(seen0.size(), 40u);
  EXPECT_EQ(s.iterations_per_epoch(), 10u);
}

TEST(BatchSampler, DeterministicAndValidated) {
  BatchSampler a({30, 30}, {4, 4}, 9), b({30, 30}, {4, 4}, 9);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_THROW(BatchSampler({3}, {4}, 0), ConfigError);
}

TEST(Pairs, LabelsAndCounts) {
  EXPECT_EQ(pair_label(4.2, 3.1), 1.0);
  EXPECT_EQ(pair_label(3.1, 4.2), 0.0);
  EXPECT_EQ(pair_label(3.0, 3.0), 1.0);
  ImageRecord x{.dataset_id = 0}, y{.dataset_id = 1};
  EXPECT_THROW(pair_label(x, y), DataError);

  std::vector<ImageRecord> recs(20);
  std::vector<const ImageRecord*> batch;
  for (std::size_t i = 0; i < 20; ++i) {
    recs[i].dataset_id = i < 4 ? 0 : 1;
    recs[i].mos = static_cast<double>(i % 7);
    batch.push_back(&recs[i]);
  }
  auto pairs = make_pairs(batch);
  EXPECT_EQ(pairs.size(), 126u);
  for (const auto& p : pairs) {
    EXPECT_EQ(recs[p.x].dataset_id, recs[p.y].dataset_id);
    EXPECT_EQ(p.label, pair_label(recs[p.x].mos, recs[p.y].mos));
  }
}
