#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "mtiqa/errors.hpp"
#include "mtiqa/metrics.hpp"

using namespace mtiqa;

namespace {

// O(n^2) average ranks: 1 + #smaller + (#equal - 1) / 2.
std::vector<double> brute_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, eq = 0;
    for (double v : x) {
      less += v < x[i];
      eq += v == x[i];
    }
    r[i] = 1.0 + less + (eq - 1.0) / 2.0;
  }
  return r;
}

double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

}  // namespace

TEST(Srcc, Examples) {
  EXPECT_NEAR(srcc({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, 1e-15);
  EXPECT_NEAR(srcc({1, 2, 3, 4, 5}, {2, 4, 8, 16, 32}), 1.0, 1e-15);
  EXPECT_NEAR(srcc({1, 2, 3, 4, 5}, {5, 3, 1, 0, -1}), -1.0, 1e-15);
  EXPECT_THROW(srcc({1, 1, 1}, {1, 2, 3}), NumericalError);
}

TEST(Srcc, AverageRanksWithTies) {
  EXPECT_EQ(average_ranks({10, 20, 10, 30}), (std::vector<double>{1.5, 3, 1.5, 4}));
}

TEST(Correlation, MatchesBruteForce) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 3 + rng() % 60;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = std::normal_distribution<double>()(rng);
      y[i] = x[i] + std::normal_distribution<double>()(rng);
      if (trial % 3 == 0) {  // force ties
        x[i] = std::round(x[i] * 2);
        y[i] = std::round(y[i]);
      }
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) continue;
    EXPECT_NEAR(srcc(x, y), brute_pearson(brute_ranks(x), brute_ranks(y)), 1e-12);
    EXPECT_NEAR(plcc(x, y), brute_pearson(x, y), 1e-12);
    EXPECT_EQ(average_ranks(x), brute_ranks(x));
  }
}

TEST(Plcc, Examples) {
  std::vector<double> x{0.1, 0.5, 0.9, 1.3, 2.0, 2.2};
  std::vector<double> y, neg;
  for (double v : x) {
    y.push_back(2 * v + 1);
    neg.push_back(-v);
  }
  EXPECT_NEAR(plcc(x, y), 1.0, 1e-15);
  EXPECT_NEAR(plcc(x, neg), -1.0, 1e-15);
}

TEST(Plcc, MappedBeatsUnmappedOnLogisticData) {
  std::vector<double> x, y;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    double v = std::uniform_real_distribution<double>(-4, 4)(rng);
    x.push_back(v);
    y.push_back(1 + 4 / (1 + std::exp(-1.5 * v)) + 0.05 * std::normal_distribution<double>()(rng));
  }
  EXPECT_GE(plcc(x, y, true), plcc(x, y, false));
}

TEST(MonotoneMap, RecoversNoiseFreeLogistic) {
  std::vector<double> x, y;
  for (int i = 0; i < 100; ++i) {
    double v = -3 + 6.0 * i / 99.0;
    x.push_back(v);
    y.push_back(10 + 30 / (1 + std::exp(-(v - 0.4) / 0.7)));
  }
  auto m = fit_monotone_map(x, y);
  EXPECT_LT(m.rms, 1e-3);
  EXPECT_FALSE(m.degenerate);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(m(x[i]), y[i], 1e-2);
  for (int i = 1; i < 100; ++i) EXPECT_GE(m(i * 0.1), m((i - 1) * 0.1));
}

TEST(MonotoneMap, ConstantTargetsAreDegenerate) {
  auto m = fit_monotone_map({1, 2, 3, 4, 5, 6}, {2, 2, 2, 2, 2, 2});
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m(3.5), 2.0);
}

TEST(Accuracy, Examples) {
  EXPECT_EQ(scene_accuracy({0, 3}, {1u << 0, 1u << 3}), 1.0);
  EXPECT_EQ(scene_accuracy({1, 2}, {1u << 0, 1u << 3}), 0.0);
  // {animal, plant} with prediction plant counts.
  EXPECT_EQ(scene_accuracy({6}, {(1u << 0) | (1u << 6)}), 1.0);
  EXPECT_EQ(distortion_accuracy({1, 2, 3, 4}, {1, 2, 0, 0}), 0.5);
}

TEST(Stats, MedianStddevPercentile) {
  EXPECT_EQ(median({5, 1, 3}), 3.0);
  std::vector<double> ten{10, 2, 8, 4, 6, 1, 9, 3, 7, 5};
  auto sorted = ten;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(median(ten), (sorted[4] + sorted[5]) / 2);
  EXPECT_NEAR(stddev({2, 4, 4, 4, 5, 5, 7, 9}), std::sqrt(32.0 / 7.0), 1e-15);
  EXPECT_EQ(stddev({3}), 0.0);
  EXPECT_EQ(percentile({0, 10}, 25), 2.5);
  EXPECT_EQ(percentile({4, 1, 3}, 100), 4.0);
}

namespace {

struct OraclePair {
  std::size_t best, worst;
  double gap;
};

// Exhaustive search mirroring the documented contract: bins by stable rank
// of the fixed scores, admissible pairs have fixed gap <= eps, maximize the
// varying gap, ties to the smallest (best, worst).
std::vector<std::optional<OraclePair>> oracle(const std::vector<double>& fixed, const std::vector<double>& vary,
                                              std::size_t levels, double eps) {
  const std::size_t n = fixed.size();
  std::vector<std::size_t> bin(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) rank += fixed[j] < fixed[i] || (fixed[j] == fixed[i] && j < i);
    // Bin l covers ranks [floor(l n / L), floor((l + 1) n / L)).
    std::size_t l = 0;
    while ((l + 1) * n / levels <= rank) ++l;
    bin[i] = l;
  }
  std::vector<std::optional<OraclePair>> out(levels);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || bin[i] != bin[j] || std::abs(fixed[i] - fixed[j]) > eps) continue;
      // i is "best": strictly higher varying score, or equal with lower index.
      if (!(vary[i] > vary[j] || (vary[i] == vary[j] && i < j))) continue;
      OraclePair p{i, j, vary[i] - vary[j]};
      auto& cur = out[bin[i]];
      if (!cur || p.gap > cur->gap || (p.gap == cur->gap && (p.best < cur->best ||
                                                              (p.best == cur->best && p.worst < cur->worst))))
        cur = p;
    }
  return out;
}

void expect_matches_oracle(const std::vector<double>& a, const std::vector<double>& b, std::size_t levels, double eps) {
  auto pairs = gmad(a, b, {levels, eps});
  std::size_t k = 0;
  for (int role = 0; role < 2; ++role) {
    auto want = oracle(role == 0 ? a : b, role == 0 ? b : a, levels, eps);
    for (std::size_t l = 0; l < levels; ++l) {
      if (!want[l]) continue;
      ASSERT_LT(k, pairs.size());
      const auto& p = pairs[k++];
      EXPECT_EQ(p.attacker, role);
      EXPECT_EQ(p.level, l);
      EXPECT_EQ(p.best, want[l]->best) << "role " << role << " level " << l;
      EXPECT_EQ(p.worst, want[l]->worst);
      EXPECT_EQ(p.defender_gap, want[l]->gap);
      EXPECT_LE(p.attacker_gap, eps);
    }
  }
  EXPECT_EQ(k, pairs.size());
}

}  // namespace

TEST(Gmad, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(200), b(200);
    for (std::size_t i = 0; i < 200; ++i) {
      a[i] = std::uniform_real_distribution<double>(1, 5)(rng);
      b[i] = 0.6 * a[i] + std::normal_distribution<double>(0, 0.7)(rng);
      if (trial % 2) {  // coarse scores force ties in both models
        a[i] = std::round(a[i] * 4) / 4;
        b[i] = std::round(b[i] * 4) / 4;
      }
    }
    expect_matches_oracle(a, b, 1 + trial % 4, trial % 2 ? 0.25 : 0.02);
  }
}

TEST(Gmad, IdenticalModelsHaveSmallDefenderGap) {
  std::mt19937_64 rng(5);
  std::vector<double> a(100);
  for (auto& v : a) v = std::uniform_real_distribution<double>(1, 5)(rng);
  auto pairs = gmad(a, a, {2, 0.0});
  EXPECT_EQ(pairs.size(), 4u);
  for (const auto& p : pairs) EXPECT_LE(p.defender_gap, p.epsilon);
}

TEST(Gmad, TinyBinsAreSkippedWithWarning) {
  std::vector<std::string> warnings;
  auto pairs = gmad({1.0, 2.0, 3.0}, {3.0, 1.0, 2.0}, {3, 10.0}, &warnings);
  EXPECT_TRUE(pairs.empty());
  EXPECT_EQ(warnings.size(), 6u);
}
