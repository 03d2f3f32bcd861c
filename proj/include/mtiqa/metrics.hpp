#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mtiqa {

/// Average ranks (1-based); tied values share the mean of their ranks.
std::vector<double> average_ranks(const std::vector<double>& x);

double pearson(const std::vector<double>& x, const std::vector<double>& y);
double srcc(const std::vector<double>& x, const std::vector<double>& y);

/// f(x) = a + (b - a) / (1 + exp(-(x - c) / d)) with b > a and d > 0, so
/// f is increasing. Coefficients apply to standardized x and y; operator()
/// takes and returns raw units.
struct MonotoneMap {
  double a = 0.0;
  double b = 1.0;
  double c = 0.0;
  double d = 1.0;
  double x_mean = 0.0;
  double x_scale = 1.0;
  double y_mean = 0.0;
  double y_scale = 1.0;
  double rms = 0.0;  // residual RMS in raw target units
  std::size_t iterations = 0;
  bool converged = false;
  bool degenerate = false;  // constant targets: map returns their value

  double operator()(double x) const;
};

struct MonotoneFitOptions {
  std::size_t max_iterations = 20000;
  double lr = 0.05;
  // Converged once the loss improves by less than this (relative) over a
  // full check interval.
  double tolerance = 1e-12;
  std::size_t check_every = 200;
};

/// Least-squares logistic fit by Adam through the autodiff graph.
MonotoneMap fit_monotone_map(const std::vector<double>& scores, const std::vector<double>& targets,
                             const MonotoneFitOptions& options = {});

/// Pearson correlation, optionally after mapping x through a fitted
/// monotone logistic.
double plcc(const std::vector<double>& x, const std::vector<double>& y, bool mapped = false);

/// Fraction of images whose predicted scene is in their scene set.
double scene_accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::uint16_t>& truth_masks);
/// Fraction of exact distortion matches.
double distortion_accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth);

double median(std::vector<double> x);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(const std::vector<double>& x);
/// Linear-interpolated percentile, q in [0, 100].
double percentile(std::vector<double> x, double q);

// ---- gMAD ---------------------------------------------------------------

/// One competition pair. The attacker is the model held fixed: its scores
/// for the two images differ by at most epsilon. The defender is the model
/// whose score gap is maximized over admissible pairs; a large defender gap
/// means the two models disagree strongly about this pair.
struct GmadPair {
  int attacker = 0;
  int defender = 1;
  std::size_t level = 0;
  std::size_t best = 0;   // higher defender score (ties: lower index)
  std::size_t worst = 0;
  double attacker_gap = 0.0;
  double defender_gap = 0.0;
  double epsilon = 0.0;
  friend bool operator==(const GmadPair&, const GmadPair&) = default;
};

struct GmadOptions {
  std::size_t levels = 2;
  double epsilon = 0.0;  // <= 0 selects the 1st percentile of pairwise fixed-model gaps
  friend bool operator==(const GmadOptions&, const GmadOptions&) = default;
};

/// Both role assignments: first model A fixed, then model B fixed, one pair
/// per quantile bin of the fixed model's scores. Bins with fewer than two
/// images or no admissible pair are skipped and reported in `warnings`.
std::vector<GmadPair> gmad(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                           const GmadOptions& options = {}, std::vector<std::string>* warnings = nullptr);

/// Quantile bin membership used by gmad: bin l holds the images whose rank
/// in the fixed scores falls in [l n / L, (l+1) n / L).
std::vector<std::vector<std::size_t>> quantile_bins(const std::vector<double>& fixed, std::size_t levels);

double default_gmad_epsilon(const std::vector<double>& fixed);

}  // namespace mtiqa
