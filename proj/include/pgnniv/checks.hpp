#pragma once

// Pass/fail checks on experiment reports, one per claim the studies support.
// Used by `reproduce` and by the acceptance runner.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pgnniv/experiments.hpp"
#include "pgnniv/metrics.hpp"
#include "pgnniv/report.hpp"
#include "pgnniv/text.hpp"

namespace pgnniv {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string fmt3(double v) { return text::format_double(v, 3); }

inline double metric_of(const RunResult& r, const std::string& key) {
  auto it = r.metrics.find(key);
  return it == r.metrics.end() ? std::nan("") : it->second;
}

}  // namespace detail

/// Constrained smoothed RMSE below the twin's at the comparison iteration in
/// at least `share` of at least `min_seeds` seeds.
inline CheckResult check_acceleration(const Report& r, const std::string& constrained, const std::string& twin,
                                      double share = 0.7, std::size_t min_seeds = 10) {
  CheckResult c{"convergence acceleration", false, ""};
  for (const auto& cmp : twin_comparisons(r)) {
    if (cmp.constrained != constrained || cmp.twin != twin) continue;
    const auto& res = cmp.result;
    const double frac = res.seeds_compared ? static_cast<double>(res.wins_a) / static_cast<double>(res.seeds_compared) : 0.0;
    c.passed = res.seeds_compared >= min_seeds && frac >= share;
    c.detail = "constrained lower at iteration " + std::to_string(r.config.eval.compare_at) + " in " +
               std::to_string(res.wins_a) + "/" + std::to_string(res.seeds_compared) + " seeds (need >= " +
               detail::fmt3(share * 100) + "% of >= " + std::to_string(min_seeds) + ")";
    return c;
  }
  c.detail = "no comparison between " + constrained + " and " + twin;
  return c;
}

/// |v_i Sigma_i - q| / q below `tol` over the test range, every seed of `variant`.
inline CheckResult check_pil_meaning(const Report& r, const std::string& variant, double tol = 0.05) {
  CheckResult c{"PIL physical meaning", true, ""};
  double worst = 0.0;
  for (const auto* run : r.runs_of(variant)) {
    const double e = detail::metric_of(*run, "pil_flow_max_rel");
    if (run->diverged || !(e < tol)) c.passed = false;
    worst = std::isnan(e) ? e : std::max(worst, e);
  }
  c.detail = variant + ": max |v*Sigma - q|/q = " + detail::fmt3(worst) + " (need < " + detail::fmt3(tol) + ")";
  return c;
}

inline CheckResult check_geometry(const Report& r, const std::string& constrained, const std::string& twin) {
  CheckResult c{"geometry relative error", true, ""};
  std::string d;
  for (const auto* run : r.runs_of(constrained)) {
    const double mean = detail::metric_of(*run, "rel_mean"), mx = detail::metric_of(*run, "rel_max_abs");
    const double twin_max = detail::metric_of(r.run(twin, run->seed), "rel_max_abs");
    const bool ok = std::abs(mean) < 5e-2 && mx < 1.0 && twin_max > 1.0;
    c.passed = c.passed && ok;
    d += "seed " + std::to_string(run->seed) + ": mean " + detail::fmt3(mean) + ", max|e| " + detail::fmt3(mx) +
         ", twin max|e| " + detail::fmt3(twin_max) + "; ";
  }
  c.detail = d + "need |mean| < 0.05, max < 1, twin max > 1";
  return c;
}

inline CheckResult check_identification(const Report& r, const std::string& hw, const std::string& dw) {
  CheckResult c{"model-based identification", true, ""};
  std::string d;
  for (const auto* run : r.runs_of(hw)) {
    const double e = detail::metric_of(*run, "lambda_max_rel_error");
    c.passed = c.passed && e < 1e-2;
    d += hw + " max lambda error " + detail::fmt3(e) + "; ";
  }
  for (const auto* run : r.runs_of(dw)) {
    const double e = detail::metric_of(*run, "lambda_max_rel_error");
    c.passed = c.passed && e > 1e-1;
    d += dw + " max lambda error " + detail::fmt3(e) + "; ";
  }
  c.detail = d + "need HW < 0.01, DW > 0.1";
  return c;
}

/// Noisy data (sigma = 1): constrained final smoothed RMSE lower in a majority
/// of seeds. Clean data: seed-mean RMSE ratio within [0.5, 2].
inline CheckResult check_noise(const Report& r, const std::string& noisy_con, const std::string& noisy_unc,
                               const std::string& clean_con, const std::string& clean_unc) {
  CheckResult c{"noise filtering", false, ""};
  std::size_t wins = 0, n = 0;
  for (const auto* run : r.runs_of(noisy_con)) {
    const double a = detail::metric_of(*run, "final_rmse_smoothed");
    const double b = detail::metric_of(r.run(noisy_unc, run->seed), "final_rmse_smoothed");
    ++n;
    if (a < b) ++wins;
  }
  std::vector<double> ca, cb;
  for (const auto* run : r.runs_of(clean_con)) {
    ca.push_back(detail::metric_of(*run, "final_rmse_smoothed"));
    cb.push_back(detail::metric_of(r.run(clean_unc, run->seed), "final_rmse_smoothed"));
  }
  const double ratio = mean_of(ca) / mean_of(cb);
  const bool majority = n >= 10 && 2 * wins > n;
  const bool comparable = ratio >= 0.5 && ratio <= 2.0;
  c.passed = majority && comparable;
  c.detail = "noisy: constrained lower in " + std::to_string(wins) + "/" + std::to_string(n) +
             " seeds (need majority of >= 10); clean RMSE ratio " + detail::fmt3(ratio) + " (need [0.5, 2])";
  return c;
}

inline CheckResult check_bias(const Report& r, const std::string& con, const std::string& unc) {
  CheckResult c{"bias correction", false, ""};
  std::size_t wins = 0, n = 0;
  std::vector<double> a, b;
  for (const auto* run : r.runs_of(con)) {
    const double x = detail::metric_of(*run, "sum_bias");
    const double y = detail::metric_of(r.run(unc, run->seed), "sum_bias");
    a.push_back(x);
    b.push_back(y);
    ++n;
    if (std::abs(x) < std::abs(y)) ++wins;
  }
  c.passed = n > 0 && 2 * wins > n;
  c.detail = "|sum error| smaller in " + std::to_string(wins) + "/" + std::to_string(n) + " seeds (mean " +
             detail::fmt3(mean_of(a)) + " vs " + detail::fmt3(mean_of(b)) + " Pa)";
  return c;
}

inline CheckResult check_extrapolation(const Report& r, const std::string& mf, const std::string& mf_twin,
                                       const std::string& hw) {
  CheckResult c{"extrapolation", true, ""};
  std::string d;
  for (const auto* run : r.runs_of(mf)) {
    const double a = detail::metric_of(*run, "extrap_v_mean_abs_rel");
    const double b = detail::metric_of(r.run(mf_twin, run->seed), "extrap_v_mean_abs_rel");
    c.passed = c.passed && a < b;
    d += "model-free mean|e| on v: " + detail::fmt3(a) + " vs twin " + detail::fmt3(b) + "; ";
  }
  for (const auto* run : r.runs_of(hw)) {
    const double e = detail::metric_of(*run, "extrap_out_max_abs_rel");
    c.passed = c.passed && e < 1e-2;
    d += hw + " max|e| on outputs " + detail::fmt3(e) + " (need < 0.01)";
  }
  c.detail = d;
  return c;
}

inline CheckResult check_characterization(const Report& r, const std::string& variant, double tol = 0.10) {
  CheckResult c{"characterization", true, ""};
  std::string d;
  for (const auto* run : r.runs_of(variant)) {
    const double e = detail::metric_of(*run, "kappa_mean_abs");
    c.passed = c.passed && e < tol;
    d += "seed " + std::to_string(run->seed) + " mean|e| " + detail::fmt3(e) + "; ";
  }
  c.detail = d + "interior kappa, need < " + detail::fmt3(tol);
  return c;
}

/// The checks that apply to a built-in experiment's report.
inline std::vector<CheckResult> checks_for(const Report& r) {
  const auto& c = r.config;
  std::vector<CheckResult> out;
  const auto has = [&](const char* v) { return c.has_variant(v); };
  if (c.id == "E1") {
    if (has("constrained") && has("unconstrained")) out.push_back(check_acceleration(r, "constrained", "unconstrained"));
    if (has("constrained_long")) out.push_back(check_pil_meaning(r, "constrained_long"));
  } else if (c.id == "E2") {
    out.push_back(check_geometry(r, "constrained", "unconstrained"));
  } else if (c.id == "E3") {
    if (has("mb_hw") && has("mb_dw")) out.push_back(check_identification(r, "mb_hw", "mb_dw"));
    if (has("mf") && has("mf_unconstrained") && has("mb_hw")) {
      out.push_back(check_extrapolation(r, "mf", "mf_unconstrained", "mb_hw"));
    }
  } else if (c.id == "E4") {
    out.push_back(check_characterization(r, "constrained"));
  } else if (c.id == "E6") {
    if (has("sigma1_constrained") && has("sigma0_constrained")) {
      out.push_back(check_noise(r, "sigma1_constrained", "sigma1_unconstrained", "sigma0_constrained",
                                "sigma0_unconstrained"));
    }
    if (has("bias_constrained")) out.push_back(check_bias(r, "bias_constrained", "bias_unconstrained"));
  } else if (c.id == "E7") {
    out.push_back(check_extrapolation(r, "mf", "mf_unconstrained", "mb_hw"));
  }
  return out;
}

}  // namespace pgnniv
