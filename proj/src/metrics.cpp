#include "mtiqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "mtiqa/autograd.hpp"
#include "mtiqa/errors.hpp"
#include "mtiqa/optim.hpp"

namespace mtiqa {

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation inputs differ in length");
  if (x.size() < 2) throw std::invalid_argument("correlation needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericalError("correlation undefined: zero variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double srcc(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

double MonotoneMap::operator()(double x) const {
  if (degenerate) return y_mean;
  const double xs = (x - x_mean) / x_scale;
  const double t = (xs - c) / d;
  const double sig = 0.5 * (1.0 + std::tanh(0.5 * t));
  return y_mean + y_scale * (a + (b - a) * sig);
}

namespace {

std::pair<double, double> mean_and_scale(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : v) ss += (e - m) * (e - m);
  return {m, std::sqrt(ss / n)};
}

}  // namespace

MonotoneMap fit_monotone_map(const std::vector<double>& scores, const std::vector<double>& targets,
                             const MonotoneFitOptions& options) {
  if (scores.size() != targets.size()) throw std::invalid_argument("fit_monotone_map: length mismatch");
  if (scores.size() < 5) throw std::invalid_argument("fit_monotone_map: need at least 5 points");
  MonotoneMap map;
  const auto [xm, xs] = mean_and_scale(scores);
  const auto [ym, ys] = mean_and_scale(targets);
  map.x_mean = xm;
  map.y_mean = ym;
  if (!(ys > 0.0)) {
    map.degenerate = true;
    map.converged = true;
    return map;
  }
  if (!(xs > 0.0)) throw NumericalError("fit_monotone_map: constant scores");
  map.x_scale = xs;
  map.y_scale = ys;

  const std::size_t n = scores.size();
  Tensor x({n});
  Tensor y({n});
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = (scores[i] - xm) / xs;
    y[i] = (targets[i] - ym) / ys;
  }
  const double ymin = *std::min_element(y.data().begin(), y.data().end());
  const double ymax = *std::max_element(y.data().begin(), y.data().end());

  // b = a + exp(r) and d = exp(s) keep the map increasing for any values.
  auto pa = std::make_shared<Parameter>("a", Tensor({1}, std::vector<double>{ymin}));
  auto pr = std::make_shared<Parameter>("r", Tensor({1}, std::vector<double>{std::log(ymax - ymin)}));
  auto pc = std::make_shared<Parameter>("c", Tensor({1}, std::vector<double>{0.0}));
  auto ps = std::make_shared<Parameter>("s", Tensor({1}, std::vector<double>{0.0}));
  std::vector<ParameterPtr> params{pa, pr, pc, ps};

  Graph g;
  NodeId xin = g.input("x", {n});
  NodeId yin = g.input("y", {n});
  NodeId a = g.parameter(pa);
  NodeId t = g.div(g.sub(xin, g.parameter(pc)), g.exp(g.parameter(ps)));
  NodeId sig = g.mul_scalar(g.add_scalar(g.tanh(g.mul_scalar(t, 0.5)), 1.0), 0.5);
  NodeId f = g.add(a, g.mul(g.exp(g.parameter(pr)), sig));
  NodeId resid = g.sub(f, yin);
  NodeId loss = g.mean_all(g.mul(resid, resid));
  const std::map<std::string, Tensor> inputs{{"x", x}, {"y", y}};

  AdamWConfig cfg;
  cfg.lr = options.lr;
  cfg.weight_decay = 0.0;
  OptimizerState state = init_optimizer(params, cfg);

  double best = INFINITY;
  std::array<double, 4> best_params{};
  double last_check = INFINITY;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    for (auto& p : params) p->zero_grad();
    g.evaluate(inputs);
    const double l = g.value(loss).item();
    if (!std::isfinite(l)) break;
    if (l < best) {
      best = l;
      for (std::size_t k = 0; k < 4; ++k) best_params[k] = params[k]->value[0];
    }
    map.iterations = it + 1;
    if ((it + 1) % options.check_every == 0) {
      if (last_check - best <= options.tolerance * std::max(last_check, 1e-300) || best < 1e-30) {
        map.converged = true;
        break;
      }
      last_check = best;
    }
    g.backprop(loss);
    adamw_step(params, state, lr_at(it, options.max_iterations, options.lr));
  }
  map.a = best_params[0];
  map.b = best_params[0] + std::exp(best_params[1]);
  map.c = best_params[2];
  map.d = std::exp(best_params[3]);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = map(scores[i]) - targets[i];
    ss += e * e;
  }
  map.rms = std::sqrt(ss / static_cast<double>(n));
  return map;
}

double plcc(const std::vector<double>& x, const std::vector<double>& y, bool mapped) {
  if (x.size() < 3) throw std::invalid_argument("plcc needs at least three points");
  if (!mapped) return pearson(x, y);
  const MonotoneMap f = fit_monotone_map(x, y);
  std::vector<double> fx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fx[i] = f(x[i]);
  return pearson(fx, y);
}

double scene_accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::uint16_t>& truth_masks) {
  if (predicted.size() != truth_masks.size()) throw std::invalid_argument("scene_accuracy: length mismatch");
  if (predicted.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += (truth_masks[i] >> predicted[i]) & 1u;
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

double distortion_accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("distortion_accuracy: length mismatch");
  if (predicted.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

double median(std::vector<double> x) {
  if (x.empty()) throw std::invalid_argument("median of empty set");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 == 1 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

double stddev(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : x) ss += (e - m) * (e - m);
  return std::sqrt(ss / (n - 1.0));
}

double percentile(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("percentile of empty set");
  std::sort(x.begin(), x.end());
  const double pos = q / 100.0 * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

// ---- gMAD ---------------------------------------------------------------

std::vector<std::vector<std::size_t>> quantile_bins(const std::vector<double>& fixed, std::size_t levels) {
  if (levels == 0) throw ConfigError("gmad: levels must be positive");
  std::vector<std::size_t> order(fixed.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fixed[a] < fixed[b]; });
  std::vector<std::vector<std::size_t>> bins(levels);
  const std::size_t n = fixed.size();
  for (std::size_t l = 0; l < levels; ++l) {
    const std::size_t lo = l * n / levels;
    const std::size_t hi = (l + 1) * n / levels;
    bins[l].assign(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return bins;
}

double default_gmad_epsilon(const std::vector<double>& fixed) {
  std::vector<double> gaps;
  gaps.reserve(fixed.size() * (fixed.size() - 1) / 2);
  double min_positive = INFINITY;
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    for (std::size_t j = i + 1; j < fixed.size(); ++j) {
      const double gap = std::abs(fixed[i] - fixed[j]);
      gaps.push_back(gap);
      if (gap > 0.0) min_positive = std::min(min_positive, gap);
    }
  }
  if (gaps.empty()) return 1e-12;
  const double eps = percentile(std::move(gaps), 1.0);
  if (eps > 0.0) return eps;
  return std::isfinite(min_positive) ? min_positive : 1e-12;
}

namespace {

struct Candidate {
  bool valid = false;
  std::size_t best = 0;
  std::size_t worst = 0;
  double gap = 0.0;
};

// Orientation of a pair by the varying model: higher score is "best",
// ties go to the lower index.
Candidate orient(std::size_t i, std::size_t j, const std::vector<double>& vary) {
  Candidate c;
  c.valid = true;
  const bool i_best = vary[i] > vary[j] || (vary[i] == vary[j] && i < j);
  c.best = i_best ? i : j;
  c.worst = i_best ? j : i;
  c.gap = vary[c.best] - vary[c.worst];
  return c;
}

bool better(const Candidate& a, const Candidate& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (a.gap != b.gap) return a.gap > b.gap;
  if (a.best != b.best) return a.best < b.best;
  return a.worst < b.worst;
}

// Sliding window over the bin sorted by fixed score; two monotone deques
// track the max and min varying score among window members, so each right
// endpoint is matched with its best partner in O(1) amortized.
Candidate search_bin(const std::vector<std::size_t>& bin, const std::vector<double>& fixed,
                     const std::vector<double>& vary, double eps) {
  auto hi_before = [&](std::size_t a, std::size_t b) {  // a ranks ahead of b for "max"
    return vary[a] > vary[b] || (vary[a] == vary[b] && a < b);
  };
  auto lo_before = [&](std::size_t a, std::size_t b) {
    return vary[a] < vary[b] || (vary[a] == vary[b] && a < b);
  };
  std::deque<std::size_t> maxq;  // positions in `bin`
  std::deque<std::size_t> minq;
  std::size_t lo = 0;
  Candidate best;
  for (std::size_t j = 0; j < bin.size(); ++j) {
    const std::size_t ij = bin[j];
    while (lo < j && fixed[ij] - fixed[bin[lo]] > eps) {
      if (!maxq.empty() && maxq.front() == lo) maxq.pop_front();
      if (!minq.empty() && minq.front() == lo) minq.pop_front();
      ++lo;
    }
    if (!maxq.empty()) {
      const Candidate a = orient(bin[maxq.front()], ij, vary);
      if (better(a, best)) best = a;
      const Candidate b = orient(bin[minq.front()], ij, vary);
      if (better(b, best)) best = b;
    }
    while (!maxq.empty() && hi_before(ij, bin[maxq.back()])) maxq.pop_back();
    maxq.push_back(j);
    while (!minq.empty() && lo_before(ij, bin[minq.back()])) minq.pop_back();
    minq.push_back(j);
  }
  return best;
}

}  // namespace

std::vector<GmadPair> gmad(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                           const GmadOptions& options, std::vector<std::string>* warnings) {
  if (scores_a.size() != scores_b.size()) throw std::invalid_argument("gmad: score vectors differ in length");
  std::vector<GmadPair> out;
  for (int role = 0; role < 2; ++role) {
    const auto& fixed = role == 0 ? scores_a : scores_b;
    const auto& vary = role == 0 ? scores_b : scores_a;
    const double eps = options.epsilon > 0.0 ? options.epsilon : default_gmad_epsilon(fixed);
    const auto bins = quantile_bins(fixed, options.levels);
    for (std::size_t l = 0; l < bins.size(); ++l) {
      if (bins[l].size() < 2) {
        if (warnings) warnings->push_back("gmad: level " + std::to_string(l) + " has fewer than 2 images; skipped");
        continue;
      }
      const Candidate c = search_bin(bins[l], fixed, vary, eps);
      if (!c.valid) {
        if (warnings) warnings->push_back("gmad: level " + std::to_string(l) + " has no pair within epsilon; skipped");
        continue;
      }
      GmadPair p;
      p.attacker = role;
      p.defender = 1 - role;
      p.level = l;
      p.best = c.best;
      p.worst = c.worst;
      p.attacker_gap = std::abs(fixed[c.best] - fixed[c.worst]);
      p.defender_gap = c.gap;
      p.epsilon = eps;
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace mtiqa
