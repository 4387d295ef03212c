#pragma once

// Curves, error integrals and summary statistics used to score trained nets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "pgnniv/errors.hpp"
#include "pgnniv/training.hpp"

namespace pgnniv {

inline std::vector<double> rmse_curve(const TrainingTrace& t) {
  std::vector<double> out;
  out.reserve(t.size());
  for (const auto& r : t.records) out.push_back(std::sqrt(r.mse));
  return out;
}

inline std::vector<double> pen_curve(const TrainingTrace& t) {
  std::vector<double> out;
  out.reserve(t.size());
  for (const auto& r : t.records) out.push_back(r.pen);
  return out;
}

/// Centered moving average. The window spans (W-1)/2 points to the left and
/// the rest to the right; near the ends it is clipped to the available points.
inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  if (window == 0) throw ContractError("moving_average window must be at least 1");
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  const std::size_t left = (window - 1) / 2, right = window - 1 - left;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= left ? i - left : 0;
    const std::size_t hi = std::min(n - 1, i + right);
    out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  // Prefix differences are inexact; a window over a constant run must return
  // that constant bit for bit.
  std::vector<std::size_t> run_end(n);
  for (std::size_t i = n; i-- > 0;) run_end[i] = (i + 1 < n && x[i + 1] == x[i]) ? run_end[i + 1] : i;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= left ? i - left : 0;
    const std::size_t hi = std::min(n - 1, i + right);
    if (run_end[lo] >= hi) out[i] = x[lo];
  }
  return out;
}

using ScalarFn = std::function<double(double)>;

/// sqrt( integral_a^b (predictor - oracle)^2 dq ), composite Simpson on
/// `nodes` equally spaced points (odd, >= 3).
inline double l2_error(const ScalarFn& predictor, const ScalarFn& oracle, double a, double b,
                       std::size_t nodes = 1001) {
  if (nodes < 3 || nodes % 2 == 0) throw ContractError("Simpson quadrature needs an odd node count >= 3");
  if (!(b > a)) throw ContractError("l2_error needs a < b");
  const double h = (b - a) / static_cast<double>(nodes - 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double q = i + 1 == nodes ? b : a + h * static_cast<double>(i);
    const double d = predictor(q) - oracle(q);
    const double w = (i == 0 || i + 1 == nodes) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * d * d;
  }
  return std::sqrt(acc * h / 3.0);
}

/// Vectorized variant: predictor and oracle evaluated on the whole node grid at once.
inline double l2_error_sampled(const std::vector<double>& pred, const std::vector<double>& truth, double a,
                               double b) {
  const std::size_t nodes = pred.size();
  if (truth.size() != nodes) throw ContractError("l2_error: sample counts differ");
  if (nodes < 3 || nodes % 2 == 0) throw ContractError("Simpson quadrature needs an odd node count >= 3");
  const double h = (b - a) / static_cast<double>(nodes - 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double d = pred[i] - truth[i];
    const double w = (i == 0 || i + 1 == nodes) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * d * d;
  }
  return std::sqrt(acc * h / 3.0);
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  if (n > 1) out.back() = b;
  return out;
}

/// Linear interpolation between order statistics (R's type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double mean_of(const std::vector<double>& x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

struct RelativeErrorStats {
  double min = 0.0, q1 = 0.0, q2 = 0.0, q3 = 0.0, max = 0.0, mean = 0.0, stderr_ = 0.0;
  double mean_abs = 0.0;
  double max_abs = 0.0;
  std::size_t count = 0;
  std::size_t exclusions = 0;  // records with a zero truth
};

/// Statistics of eps = (pred - truth) / truth; zero truths are skipped and counted.
inline RelativeErrorStats relative_error_stats(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw ContractError("relative_error_stats: prediction and truth lengths differ");
  std::vector<double> eps;
  eps.reserve(pred.size());
  RelativeErrorStats s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == 0.0) {
      ++s.exclusions;
      continue;
    }
    eps.push_back((pred[i] - truth[i]) / truth[i]);
  }
  s.count = eps.size();
  if (eps.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.min = s.q1 = s.q2 = s.q3 = s.max = s.mean = s.stderr_ = s.mean_abs = s.max_abs = nan;
    return s;
  }
  std::vector<double> sorted = eps;
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q2 = quantile_sorted(sorted, 0.5);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.mean = mean_of(eps);
  double ss = 0.0, abs_sum = 0.0;
  for (double e : eps) {
    ss += (e - s.mean) * (e - s.mean);
    abs_sum += std::abs(e);
    s.max_abs = std::max(s.max_abs, std::abs(e));
  }
  s.mean_abs = abs_sum / static_cast<double>(eps.size());
  s.stderr_ = eps.size() > 1 ? std::sqrt(ss / static_cast<double>(eps.size() - 1)) / std::sqrt(static_cast<double>(eps.size())) : 0.0;
  return s;
}

/// One seed's training outcome as seen by the comparison tools.
struct SeedRun {
  std::uint64_t seed = 0;
  TrainingTrace trace;
  bool diverged = false;
};

struct RunComparison {
  double ordering_fraction = 0.5;   // share of (seed, iteration) pairs where A's RMSE < B's, ties count half
  double auc_ratio = 1.0;           // sum of A's RMSE areas over B's
  std::size_t wins_a = 0;           // seeds where A's smoothed RMSE is lower at `at_iteration`
  std::size_t wins_b = 0;
  std::size_t ties = 0;
  std::size_t seeds_compared = 0;
  std::vector<std::uint64_t> excluded_seeds;  // diverged in either run
};

/// Seed-paired comparison of two sets of training runs. Curves are smoothed with
/// `window` before the per-iteration ordering and the win count at `at_iteration`.
inline RunComparison compare_runs(const std::vector<SeedRun>& a, const std::vector<SeedRun>& b,
                                  std::size_t at_iteration, std::size_t window = 1) {
  if (a.size() != b.size()) throw ContractError("compare_runs: run sets have different seed counts");
  RunComparison out;
  double ordered = 0.0, pairs = 0.0, auc_a = 0.0, auc_b = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].seed != b[k].seed) throw ContractError("compare_runs: seed lists differ");
    if (a[k].diverged || b[k].diverged) {
      out.excluded_seeds.push_back(a[k].seed);
      continue;
    }
    if (a[k].trace.size() != b[k].trace.size()) throw ContractError("compare_runs: traces differ in length");
    if (at_iteration == 0 || at_iteration > a[k].trace.size()) {
      throw ContractError("compare_runs: iteration " + std::to_string(at_iteration) + " is outside the traces");
    }
    const auto ra = moving_average(rmse_curve(a[k].trace), window);
    const auto rb = moving_average(rmse_curve(b[k].trace), window);
    for (std::size_t i = 0; i < ra.size(); ++i) {
      ordered += ra[i] < rb[i] ? 1.0 : (ra[i] == rb[i] ? 0.5 : 0.0);
      pairs += 1.0;
      auc_a += ra[i];
      auc_b += rb[i];
    }
    const double va = ra[at_iteration - 1], vb = rb[at_iteration - 1];
    if (va < vb) ++out.wins_a;
    else if (vb < va) ++out.wins_b;
    else ++out.ties;
    ++out.seeds_compared;
  }
  if (pairs > 0.0) out.ordering_fraction = ordered / pairs;
  out.auc_ratio = auc_b > 0.0 ? auc_a / auc_b : (auc_a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  return out;
}

}  // namespace pgnniv
