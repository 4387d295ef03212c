#pragma once

// Declarative experiment configurations (network variants, data, training and
// evaluation plan), the per-run evaluation suite, and the runner that fans
// (variant x seed) jobs out over worker threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pgnniv/config.hpp"
#include "pgnniv/constraints.hpp"
#include "pgnniv/dataset.hpp"
#include "pgnniv/errors.hpp"
#include "pgnniv/hydraulics.hpp"
#include "pgnniv/metrics.hpp"
#include "pgnniv/network.hpp"
#include "pgnniv/training.hpp"

namespace pgnniv {

enum class ExperimentKind { Prediction, Geometry, Model, Characterization };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Prediction: return "prediction";
    case ExperimentKind::Geometry: return "geometry";
    case ExperimentKind::Model: return "model";
    case ExperimentKind::Characterization: return "characterization";
  }
  return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "prediction") return ExperimentKind::Prediction;
  if (s == "geometry") return ExperimentKind::Geometry;
  if (s == "model") return ExperimentKind::Model;
  if (s == "characterization") return ExperimentKind::Characterization;
  throw ConfigurationError("unknown experiment kind '" + s + "'");
}

/// One trainable configuration. A twin names the constrained variant it
/// mirrors; it must match it in everything but the penalty weights.
struct Variant {
  std::string name;
  std::string twin_of;
  NetworkSpec spec;
  std::vector<ConstraintSpec> constraints;
  config::DataConfig data;
  Hyper hyper;
  std::vector<std::uint64_t> seeds;  // empty: the experiment's seeds
  std::size_t trace_stride = 1;      // persist every k-th trace record (plus the last)
};

struct EvalPlan {
  std::size_t test_size = 1000;          // clean oracle records, drawn per seed
  Range test_q{1.0, 5.0};
  std::optional<Range> l2_interval;      // E_L2 of the total drop
  std::size_t l2_nodes = 1001;
  std::optional<Range> extrapolate;      // out-of-sample flow range
  std::size_t grid_q = 20;               // geometry evaluation grid
  std::size_t grid_l = 20;
  Range kappa_interior{90.0, 130.0};     // characterization scoring window
  std::size_t window = 500;              // moving-average window for RMSE curves
  std::size_t compare_at = 600;          // iteration of the seed-wise comparison
};

struct ExperimentConfig {
  std::string id;
  std::string title;
  ExperimentKind kind = ExperimentKind::Prediction;
  std::vector<Variant> variants;
  EvalPlan eval;
  std::vector<std::uint64_t> seeds;

  const Variant& variant(const std::string& name) const {
    for (const auto& v : variants)
      if (v.name == name) return v;
    throw ConfigurationError("experiment " + id + " has no variant '" + name + "'");
  }
  bool has_variant(const std::string& name) const {
    return std::any_of(variants.begin(), variants.end(), [&](const Variant& v) { return v.name == name; });
  }
  const std::vector<std::uint64_t>& seeds_for(const Variant& v) const { return v.seeds.empty() ? seeds : v.seeds; }

  void validate() const;
};

// --- variant text form --------------------------------------------------------

/// A single-run config: network, constraints, data, training and the [variant] header.
inline config::Tree variant_tree(const Variant& v) {
  config::Tree t;
  config::Tree head;
  head.put("name", v.name);
  head.put("twin_of", v.twin_of);
  std::vector<std::string> s;
  for (auto x : v.seeds) s.push_back(std::to_string(x));
  head.put("seeds", text::join(s, ","));
  head.put("trace_stride", v.trace_stride);
  t.put_child("variant", head);
  config::put_network(t, v.spec);
  for (const auto& c : v.constraints) config::put_constraint(t, c);
  config::put_data(t, v.data);
  config::put_hyper(t, v.hyper);
  return t;
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& text, const std::string& what) {
  std::vector<std::uint64_t> out;
  if (text::trim(text).empty()) return out;
  for (const auto& part : text::split(text, ',')) out.push_back(config::parse_count(text::trim(part), what));
  return out;
}

inline Variant variant_from_tree(const config::Tree& t) {
  Variant v;
  if (auto it = t.find("variant"); it != t.not_found()) {
    const auto& h = it->second;
    v.name = h.get<std::string>("name", "");
    v.twin_of = h.get<std::string>("twin_of", "");
    v.seeds = parse_seeds(h.get<std::string>("seeds", ""), "[variant] seeds");
    v.trace_stride = config::get_count(h, "trace_stride", std::uint64_t{1});
    if (v.trace_stride == 0) throw ConfigurationError("[variant] trace_stride must be positive");
  }
  if (v.name.empty()) v.name = "custom";
  v.spec = config::get_network(t);
  v.constraints = config::get_constraints(t);
  v.data = config::get_data(t);
  v.hyper = config::get_hyper(t);
  return v;
}

/// Same variant with every penalty weight set to zero.
inline Variant unconstrained_twin(const Variant& v, std::string name = {}) {
  Variant t = v;
  t.name = name.empty() ? v.name + "_unconstrained" : std::move(name);
  t.twin_of = v.name;
  for (auto& c : t.constraints) c.penalty = 0.0;
  return t;
}

inline void ExperimentConfig::validate() const {
  if (id.empty()) throw ConfigurationError("experiment needs an id");
  if (variants.empty()) throw ConfigurationError("experiment " + id + " has no variants");
  std::set<std::string> names;
  for (const auto& v : variants) {
    if (v.name.empty()) throw ConfigurationError("experiment " + id + " has an unnamed variant");
    if (!names.insert(v.name).second) throw ConfigurationError("duplicate variant '" + v.name + "'");
    if (seeds_for(v).empty()) throw ConfigurationError("variant '" + v.name + "' has no seeds");
    if (v.trace_stride == 0) throw ConfigurationError("variant '" + v.name + "' needs a positive trace stride");
    v.spec.validate();
    v.hyper.validate();
  }
  for (const auto& v : variants) {
    if (v.twin_of.empty()) continue;
    if (!has_variant(v.twin_of)) {
      throw ConfigurationError("variant '" + v.name + "' mirrors unknown variant '" + v.twin_of + "'");
    }
    // Twins may differ only in penalty weights.
    Variant expected = unconstrained_twin(variant(v.twin_of), v.name);
    for (auto& c : expected.constraints) c.penalty = 0.0;
    Variant actual = v;
    for (auto& c : actual.constraints) c.penalty = 0.0;
    if (config::to_text(variant_tree(expected)) != config::to_text(variant_tree(actual))) {
      throw ConfigurationError("variant '" + v.name + "' differs from '" + v.twin_of +
                               "' in more than its penalty weights");
    }
    for (const auto& c : v.constraints) {
      if (c.penalty != 0.0) throw ConfigurationError("twin '" + v.name + "' keeps a non-zero penalty on " + c.id);
    }
  }
}

// --- building -----------------------------------------------------------------

/// Rewrites a linear-state constraint declared on raw inputs for min-max scaled
/// inputs: x = min + (max - min) * x_hat.
inline ConstraintSpec rescale_constraint(ConstraintSpec c, const Scaling& s,
                                         const std::vector<std::string>& input_names) {
  if (c.type == "flow_conservation") {
    throw ConfigurationError("constraint '" + c.id + "': declare flow balances on scaled inputs as linear_state");
  }
  if (c.type != "linear_state") return c;
  for (auto& term : c.terms) {
    for (auto& [col, w] : term.input_weights) {
      if (col >= input_names.size()) throw ConfigurationError("constraint '" + c.id + "' reads a missing input");
      const std::size_t k = s.index(input_names[col]);
      term.offset += w * s.min[k];
      w *= s.range(k);
    }
  }
  return c;
}

/// Training set of a variant for one seed; `scaling` receives the min-max
/// record when the data are normalized.
inline Dataset variant_dataset(const Variant& v, std::uint64_t seed, Scaling* scaling = nullptr) {
  return config::make_dataset(v.data, seed, scaling);
}

inline Network build_variant(const Variant& v, std::uint64_t seed, const Dataset& train_set,
                             const Scaling* scaling = nullptr) {
  Network net = build_network(v.spec, seed);
  const auto inputs = train_set.names_with(ColumnRole::Input);
  for (const auto& c : v.constraints) {
    register_constraint(net, make_constraint(scaling ? rescale_constraint(c, *scaling, inputs) : c));
  }
  return net;
}

// --- evaluation ---------------------------------------------------------------

using Metrics = std::map<std::string, double>;

namespace detail {

inline const ConstraintSpec* find_flow_constraint(const Variant& v) {
  for (const auto& c : v.constraints)
    if (c.type == "flow_conservation") return &c;
  return nullptr;
}

inline double oracle_total(double q, const config::DataConfig& d) {
  if (!(q > 0.0)) return 0.0;  // no flow, no drop
  return segment_drops(q, d.pipe, d.model).total();
}

inline std::vector<double> oracle_outputs(double q, const config::DataConfig& d) {
  if (d.layout == TargetLayout::Total) return {oracle_total(q, d)};
  const auto s = segment_drops(q, d.pipe, d.model);
  return {s.dp1, s.dpe, s.dp2};
}

inline Matrix column_matrix(const std::vector<double>& xs) {
  Matrix m(xs.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(i, 0) = xs[i];
  return m;
}

inline double row_total(const Matrix& out, std::size_t i) {
  double s = 0.0;
  for (std::size_t k = 0; k < out.cols(); ++k) s += out(i, k);
  return s;
}

/// Flow-balance errors |v_i * area_i - q| / q of the velocity PIL.
inline void pil_flow_metrics(const ConstraintSpec& c, const std::vector<Matrix>& layers, const Matrix& x,
                             const std::string& prefix, Metrics& m) {
  const Matrix& y = layers.at(c.layer);
  double worst = 0.0, acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const double q = x(i, c.input_column);
    for (std::size_t k = 0; k < c.areas.size(); ++k) {
      const double e = std::abs(y(i, k) * c.areas[k] - q) / std::abs(q);
      worst = std::max(worst, e);
      acc += e;
      ++count;
    }
  }
  m[prefix + "max_rel"] = worst;
  m[prefix + "mean_rel"] = count ? acc / static_cast<double>(count) : 0.0;
}

inline void put_stats(const std::string& prefix, const RelativeErrorStats& s, Metrics& m) {
  m[prefix + "min"] = s.min;
  m[prefix + "q1"] = s.q1;
  m[prefix + "q2"] = s.q2;
  m[prefix + "q3"] = s.q3;
  m[prefix + "max"] = s.max;
  m[prefix + "mean"] = s.mean;
  m[prefix + "stderr"] = s.stderr_;
  m[prefix + "mean_abs"] = s.mean_abs;
  m[prefix + "max_abs"] = s.max_abs;
  m[prefix + "count"] = static_cast<double>(s.count);
  m[prefix + "exclusions"] = static_cast<double>(s.exclusions);
}

/// Coefficients the model layer would hold if the generating pipe followed
/// that layer's own head-loss law.
inline std::vector<double> reference_coefficients(const NetworkSpec& spec, const hydraulics::PipeParams& p) {
  if (spec.model_layer_kind == ModelLayerKind::HazenWilliams) {
    return {p.xi, hydraulics::hazen_williams_segment_coefficient(p.sigma1, p.kappa1, p),
            hydraulics::hazen_williams_segment_coefficient(p.sigma2, p.kappa2, p)};
  }
  return {p.xi, hydraulics::darcy_segment_coefficient(p.sigma1, p), hydraulics::darcy_segment_coefficient(p.sigma2, p)};
}

inline void flow_metrics(const ExperimentConfig& cfg, const Variant& v, const Network& net, std::uint64_t seed,
                         Metrics& m) {
  const auto& plan = cfg.eval;
  Rng rng = make_rng(seed, "test");
  std::uniform_real_distribution<double> uq(plan.test_q.lo, plan.test_q.hi);
  std::vector<double> qs(plan.test_size);
  for (double& q : qs) q = uq(rng);
  const Matrix x = column_matrix(qs);
  const auto layers = net.evaluate(x);
  const Matrix& out = layers.back();
  double se = 0.0, bias = 0.0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto truth = oracle_outputs(qs[i], v.data);
    for (std::size_t k = 0; k < truth.size() && k < out.cols(); ++k) se += (out(i, k) - truth[k]) * (out(i, k) - truth[k]);
    bias += row_total(out, i) - oracle_total(qs[i], v.data);
  }
  const double n = static_cast<double>(qs.size());
  m["test_rmse"] = std::sqrt(se / n);
  m["sum_bias"] = bias / n;
  if (const auto* c = find_flow_constraint(v)) pil_flow_metrics(*c, layers, x, "pil_flow_", m);

  if (plan.l2_interval) {
    const auto nodes = linspace(plan.l2_interval->lo, plan.l2_interval->hi, plan.l2_nodes);
    const auto pred = net.evaluate(column_matrix(nodes)).back();
    std::vector<double> p(nodes.size()), t(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      p[i] = row_total(pred, i);
      t[i] = oracle_total(nodes[i], v.data);
    }
    m["l2_error"] = l2_error_sampled(p, t, plan.l2_interval->lo, plan.l2_interval->hi);
  }

  if (v.spec.model_based()) {
    const auto ref = reference_coefficients(v.spec, v.data.pipe);
    const auto est = extract_parameters(net);
    double worst = 0.0;
    for (std::size_t k = 0; k < est.size(); ++k) {
      const double e = std::abs(est[k].second - ref[k]) / std::abs(ref[k]);
      m["lambda" + std::to_string(k + 1)] = est[k].second;
      m["lambda" + std::to_string(k + 1) + "_rel_error"] = e;
      worst = std::max(worst, e);
    }
    m["lambda_max_rel_error"] = worst;
  }

  if (plan.extrapolate) {
    const auto qx = linspace(plan.extrapolate->lo, plan.extrapolate->hi, plan.test_size);
    const Matrix xe = column_matrix(qx);
    const auto le = net.evaluate(xe);
    std::vector<double> pred, truth;
    for (std::size_t i = 0; i < qx.size(); ++i) {
      const auto t = oracle_outputs(qx[i], v.data);
      for (std::size_t k = 0; k < t.size() && k < le.back().cols(); ++k) {
        pred.push_back(le.back()(i, k));
        truth.push_back(t[k]);
      }
    }
    const auto so = relative_error_stats(pred, truth);
    m["extrap_out_mean_abs_rel"] = so.mean_abs;
    m["extrap_out_max_abs_rel"] = so.max_abs;
    if (const auto* c = find_flow_constraint(v)) {
      // Velocities of the two pipe segments (PIL neurons 1 and 2).
      std::vector<double> vp, vt;
      for (std::size_t i = 0; i < qx.size(); ++i) {
        for (std::size_t k = 1; k < c->areas.size() && k < 3; ++k) {
          vp.push_back(le.at(c->layer)(i, k));
          vt.push_back(qx[i] / c->areas[k]);
        }
      }
      const auto sv = relative_error_stats(vp, vt);
      m["extrap_v_mean_abs_rel"] = sv.mean_abs;
      m["extrap_v_max_abs_rel"] = sv.max_abs;
    }
  }
}

inline void geometry_metrics(const ExperimentConfig& cfg, const Variant& v, const Network& net, Metrics& m) {
  const auto& plan = cfg.eval;
  const Dataset grid = geometry_grid(plan.grid_q, plan.grid_l, plan.test_q, v.data.length_range, v.data.pipe);
  const Matrix out = net.evaluate(grid.inputs()).back();
  const auto truth = grid.column("dp");
  std::vector<double> pred(out.rows());
  double se = 0.0;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    pred[i] = out(i, 0);
    se += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  }
  m["test_rmse"] = std::sqrt(se / static_cast<double>(out.rows()));
  put_stats("rel_", relative_error_stats(pred, truth), m);
  if (const auto* c = find_flow_constraint(v)) {
    const Matrix x = grid.inputs();
    pil_flow_metrics(*c, net.evaluate(x), x, "pil_flow_", m);
  }
}

inline void characterization_metrics(const ExperimentConfig& cfg, const Variant& v, const Network& net,
                                     std::uint64_t seed, const Scaling* scaling, Metrics& m) {
  const auto& d = v.data;
  const Dataset raw = generate_characterization_dataset(cfg.eval.test_size, d.q_range, d.kappa_range, d.pipe,
                                                        derive_seed(seed, "test"), d.outlet_range);
  const Dataset test = scaling ? apply_scaling(raw, *scaling) : raw;
  const Matrix out = net.evaluate(test.inputs()).back();
  const auto targets = raw.columns_with(ColumnRole::Target);
  std::vector<double> pred_in, truth_in, pred_all, truth_all;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const std::size_t j = targets[k];
      const double kappa = scaling ? scaling->denormalize(scaling->index(raw.schema()[j].name), out(i, k)) : out(i, k);
      const double t = raw.data()(i, j);
      pred_all.push_back(kappa);
      truth_all.push_back(t);
      if (t >= cfg.eval.kappa_interior.lo && t <= cfg.eval.kappa_interior.hi) {
        pred_in.push_back(kappa);
        truth_in.push_back(t);
      }
    }
  }
  put_stats("kappa_", relative_error_stats(pred_in, truth_in), m);
  m["kappa_all_mean_abs"] = relative_error_stats(pred_all, truth_all).mean_abs;
}

}  // namespace detail

/// Trace summaries shared by every experiment kind.
inline Metrics trace_metrics(const TrainingTrace& trace, std::size_t window) {
  Metrics m;
  if (trace.records.empty()) return m;
  const auto smooth = moving_average(rmse_curve(trace), std::max<std::size_t>(1, window));
  m["final_rmse"] = std::sqrt(trace.records.back().mse);
  m["final_rmse_smoothed"] = smooth.back();
  m["final_pen"] = trace.records.back().pen;
  m["iterations"] = static_cast<double>(trace.records.size());
  return m;
}

/// The evaluation plan applied to a trained network.
inline Metrics evaluate_network(const ExperimentConfig& cfg, const Variant& v, const Network& net, std::uint64_t seed,
                                const Scaling* scaling = nullptr) {
  Metrics m;
  switch (cfg.kind) {
    case ExperimentKind::Prediction:
    case ExperimentKind::Model:
      detail::flow_metrics(cfg, v, net, seed, m);
      break;
    case ExperimentKind::Geometry:
      detail::geometry_metrics(cfg, v, net, m);
      break;
    case ExperimentKind::Characterization:
      detail::characterization_metrics(cfg, v, net, seed, scaling, m);
      break;
  }
  return m;
}

// --- running ------------------------------------------------------------------

struct RunResult {
  std::string variant;
  std::uint64_t seed = 0;
  TrainingTrace trace;  // decimated by the variant's trace stride
  Metrics metrics;
  bool diverged = false;
  std::string error;
  std::optional<Network> network;
};

struct Report {
  ExperimentConfig config;
  std::vector<RunResult> runs;

  const RunResult& run(const std::string& variant, std::uint64_t seed) const {
    for (const auto& r : runs)
      if (r.variant == variant && r.seed == seed) return r;
    throw ContractError("report has no run " + variant + " seed " + std::to_string(seed));
  }
  std::vector<const RunResult*> runs_of(const std::string& variant) const {
    std::vector<const RunResult*> out;
    for (const auto& r : runs)
      if (r.variant == variant) out.push_back(&r);
    return out;
  }
};

/// Keeps records whose iteration is a multiple of `stride`, plus the last one.
inline TrainingTrace decimate(const TrainingTrace& t, std::size_t stride) {
  if (stride <= 1) return t;
  TrainingTrace out;
  out.metrics = t.metrics;
  out.diverged = t.diverged;
  out.divergence_iteration = t.divergence_iteration;
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    if (t.records[i].iteration % stride == 0 || i + 1 == t.records.size()) out.records.push_back(t.records[i]);
  }
  return out;
}

/// Trains and evaluates one (variant, seed) job. Divergence is recorded, not thrown.
inline RunResult run_single(const ExperimentConfig& cfg, const Variant& v, std::uint64_t seed,
                            bool keep_network = false) {
  RunResult r;
  r.variant = v.name;
  r.seed = seed;
  Scaling scaling;
  const Dataset ds = variant_dataset(v, seed, &scaling);
  const Scaling* sc = v.data.normalize ? &scaling : nullptr;
  Network net = build_variant(v, seed, ds, sc);
  TrainingTrace trace;
  try {
    trace = train(net, ds, v.hyper, seed);
  } catch (const TrainingDiverged& e) {
    r.diverged = true;
    r.error = e.what();
    trace = e.trace();
  }
  r.metrics = trace_metrics(trace, cfg.eval.window);
  if (!r.diverged) {
    for (auto& [k, val] : evaluate_network(cfg, v, net, seed, sc)) r.metrics[k] = val;
  }
  r.metrics["diverged"] = r.diverged ? 1.0 : 0.0;
  r.trace = decimate(trace, v.trace_stride);
  if (keep_network) r.network = std::move(net);
  return r;
}

struct RunOptions {
  std::size_t jobs = 1;
  bool keep_networks = false;
  std::function<void(const std::string&)> log;  // called from worker threads, serialized
};

/// Every (variant, seed) job; jobs run concurrently up to `jobs`, results are
/// stored in config order regardless of completion order.
inline Report run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  std::vector<std::pair<const Variant*, std::uint64_t>> jobs;
  for (const auto& v : cfg.variants)
    for (auto s : cfg.seeds_for(v)) jobs.emplace_back(&v, s);
  Report rep{cfg, std::vector<RunResult>(jobs.size())};
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const auto& [v, seed] = jobs[k];
      try {
        rep.runs[k] = run_single(cfg, *v, seed, opt.keep_networks);
      } catch (...) {
        std::lock_guard lock(log_mutex);
        if (!failure) failure = std::current_exception();
        continue;
      }
      if (opt.log) {
        std::lock_guard lock(log_mutex);
        const auto& r = rep.runs[k];
        opt.log(cfg.id + " " + v->name + " seed " + std::to_string(seed) +
                (r.diverged ? " diverged: " + r.error : " done, final RMSE " +
                                                            text::format_double(r.metrics.at("final_rmse"), 6)));
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(opt.jobs, jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rep;
}

// --- built-in studies ---------------------------------------------------------

namespace builtin {

inline std::vector<std::uint64_t> seed_range(std::uint64_t n) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = 1; s <= n; ++s) out.push_back(s);
  return out;
}

/// q -> PIL (v0, v1, v2) -> 15 linear -> 15 relu -> outputs.
inline NetworkSpec model_free_spec(std::size_t outputs) {
  NetworkSpec s;
  s.input_size = 1;
  s.layers = {{3, Activation::Linear}, {15, Activation::Linear}, {15, Activation::Relu}, {outputs, Activation::Linear}};
  s.pil_markers = {1};
  return s;
}

/// Velocity PIL with Sigma_0 := Sigma_1 (the inlet shares segment 1's section).
inline ConstraintSpec flow_spec(const hydraulics::PipeParams& p, double penalty, std::size_t layer = 1) {
  return *flow_conservation("flow", layer, {p.sigma1, p.sigma1, p.sigma2}, 0, penalty).spec;
}

inline Variant prediction_variant(double penalty, std::size_t iterations) {
  Variant v;
  v.name = "constrained";
  v.spec = model_free_spec(1);
  v.constraints = {flow_spec(v.data.pipe, penalty)};
  v.data.m = 1000;
  v.hyper = {.iterations = iterations, .batch_size = 4, .learning_rate = 1e-3};
  return v;
}

inline ExperimentConfig e1() {
  ExperimentConfig c;
  c.id = "E1";
  c.title = "prediction: constrained vs unconstrained net";
  c.kind = ExperimentKind::Prediction;
  Variant con = prediction_variant(0.01, 3000);
  c.variants = {con, unconstrained_twin(con, "unconstrained")};
  // Long single-seed run for the physical reading of the PIL.
  Variant longer = prediction_variant(0.01, 3000000);
  longer.name = "constrained_long";
  longer.seeds = {1};
  longer.trace_stride = 1000;
  c.variants.push_back(longer);
  c.eval.l2_interval = Range{0.0, 10.0};
  c.seeds = seed_range(10);
  return c;
}

inline ExperimentConfig e2() {
  ExperimentConfig c;
  c.id = "E2";
  c.title = "geometry-dependent net";
  c.kind = ExperimentKind::Geometry;
  Variant v;
  v.name = "constrained";
  v.spec.input_size = 3;
  v.spec.layers = {{3, Activation::Linear}, {15, Activation::Relu}, {2, Activation::Linear}, {1, Activation::ModelLayer}};
  v.spec.pil_markers = {1, 3};
  v.spec.model_layer_kind = ModelLayerKind::GeometryIntegrator;
  v.spec.pipe = hydraulics::geometry_params();
  v.spec.input_scaling = {{1.0, 5.0}, {0.0, 10.0}, {0.0, 10.0}};
  v.data.generator = "geometry";
  v.data.m = 10000;
  v.data.pipe = hydraulics::geometry_params();
  v.constraints = {flow_spec(v.data.pipe, 1.0)};
  v.hyper = {.iterations = 200000, .batch_size = 100, .learning_rate = 3e-3};
  v.trace_stride = 10;
  c.variants = {v, unconstrained_twin(v, "unconstrained")};
  c.eval.window = 500;
  c.seeds = {1};
  return c;
}

/// q -> PIL (v0, v1, v2) -> model layer (dp1, dpe, dp2) with trainable lambdas.
inline Variant model_based_variant(const std::string& name, ModelLayerKind kind, std::size_t iterations) {
  Variant v;
  v.name = name;
  v.data.layout = TargetLayout::Segments;
  v.spec.input_size = 1;
  v.spec.layers = {{3, Activation::Linear}, {3, Activation::ModelLayer}};
  v.spec.pil_markers = {1};
  v.spec.model_layer_kind = kind;
  v.spec.pipe = v.data.pipe;
  // Scales put theta ~ 1 at a mid-range roughness.
  const auto& p = v.data.pipe;
  const bool hw = kind == ModelLayerKind::HazenWilliams;
  v.spec.physical_params = {
      {"lambda1", 1.0, {}},
      {"lambda2", hw ? hydraulics::hazen_williams_segment_coefficient(p.sigma1, 110.0, p)
                     : hydraulics::darcy_segment_coefficient(p.sigma1, p), {}},
      {"lambda3", hw ? hydraulics::hazen_williams_segment_coefficient(p.sigma2, 110.0, p)
                     : hydraulics::darcy_segment_coefficient(p.sigma2, p), {}}};
  v.constraints = {flow_spec(p, 0.01)};
  v.hyper = {.iterations = iterations, .batch_size = 4, .learning_rate = 1e-4};
  v.trace_stride = iterations >= 1000000 ? 1000 : 10;
  return v;
}

inline Variant model_free_segments_variant(std::size_t iterations) {
  Variant v;
  v.name = "mf";
  v.data.layout = TargetLayout::Segments;
  v.spec = model_free_spec(3);
  v.constraints = {flow_spec(v.data.pipe, 0.01)};
  v.hyper = {.iterations = iterations, .batch_size = 4, .learning_rate = 1e-4};
  v.trace_stride = 10;
  return v;
}

inline ExperimentConfig e3() {
  ExperimentConfig c;
  c.id = "E3";
  c.title = "model-free vs model-based nets, parameter identification";
  c.kind = ExperimentKind::Model;
  const Variant mf = model_free_segments_variant(200000);
  const Variant hw = model_based_variant("mb_hw", ModelLayerKind::HazenWilliams, 8000000);
  const Variant dw = model_based_variant("mb_dw", ModelLayerKind::DarcyWeisbach, 2000000);
  c.variants = {mf, unconstrained_twin(mf), hw, unconstrained_twin(hw), dw, unconstrained_twin(dw)};
  c.eval.extrapolate = Range{5.0, 10.0};
  c.seeds = {1};
  return c;
}

inline ExperimentConfig e4() {
  ExperimentConfig c;
  c.id = "E4";
  c.title = "roughness characterization";
  c.kind = ExperimentKind::Characterization;
  Variant v;
  v.name = "constrained";
  v.data.generator = "characterization";
  v.data.m = 10000;
  v.data.normalize = true;
  v.data.pipe = characterization_params();
  v.spec.input_size = 4;
  v.spec.layers = {{4, Activation::Linear},  {20, Activation::Relu}, {40, Activation::Relu}, {80, Activation::Relu},
                   {40, Activation::Relu}, {20, Activation::Relu}, {2, Activation::Linear}};
  v.spec.pil_markers = {1};
  // PIL (v1, v2, dp1, dp2) in physical units; inputs are (q, p0, p1, p2).
  const auto& p = v.data.pipe;
  std::vector<LinearStateTerm> terms{{0, 1.0, 0.0, {{0, 1.0 / p.sigma1}}},
                                     {1, 1.0, 0.0, {{0, 1.0 / p.sigma2}}},
                                     {2, 1.0, 0.0, {{1, 1.0}, {2, -1.0}}},
                                     {3, 1.0, 0.0, {{2, 1.0}, {3, -1.0}}}};
  v.constraints = {*linear_state_constraint("state", 1, terms, 1e-3).spec};
  v.hyper = {.iterations = 20000, .batch_size = 300, .learning_rate = 3e-2};
  c.variants = {v, unconstrained_twin(v, "unconstrained")};
  c.eval.window = 200;
  c.seeds = {1};
  return c;
}

inline ExperimentConfig e5() {
  ExperimentConfig c;
  c.id = "E5";
  c.title = "data-set size sweep";
  c.kind = ExperimentKind::Prediction;
  for (std::size_t m : {2, 10, 50}) {
    Variant v = prediction_variant(0.01, 3000);
    v.name = "m" + std::to_string(m) + "_constrained";
    v.data.m = m;
    v.hyper.full_batch = true;
    v.hyper.batch_size = m;
    c.variants.push_back(v);
    c.variants.push_back(unconstrained_twin(v, "m" + std::to_string(m) + "_unconstrained"));
  }
  c.eval.window = 100;
  c.seeds = seed_range(10);
  return c;
}

inline std::string sigma_tag(double s) {
  if (s == 0.0) return "0";
  std::string t = text::format_double(s, 3);
  std::replace(t.begin(), t.end(), '.', 'p');
  return t;
}

inline ExperimentConfig e6() {
  ExperimentConfig c;
  c.id = "E6";
  c.title = "noise filtering and bias correction";
  c.kind = ExperimentKind::Prediction;
  for (double sigma : {0.0, 0.01, 0.1, 1.0}) {
    Variant v = prediction_variant(0.01, 50000);
    v.name = "sigma" + sigma_tag(sigma) + "_constrained";
    v.data.noise = sigma;
    v.trace_stride = 10;
    c.variants.push_back(v);
    c.variants.push_back(unconstrained_twin(v, "sigma" + sigma_tag(sigma) + "_unconstrained"));
  }
  // Segment outputs tied to a measured total; noise 0.1 Pa and bias -0.2 Pa.
  Variant b = prediction_variant(0.01, 50000);
  b.name = "bias_constrained";
  b.spec = model_free_spec(3);
  b.data.layout = TargetLayout::SegmentsWithTotal;
  b.data.noise = 0.1;
  b.data.bias = -0.2;
  b.constraints.push_back(*output_sum("sum", 4, 0, 1.0).spec);
  b.trace_stride = 10;
  c.variants.push_back(b);
  c.variants.push_back(unconstrained_twin(b, "bias_unconstrained"));
  c.seeds = seed_range(10);
  return c;
}

inline ExperimentConfig e7() {
  ExperimentConfig c = e3();
  c.id = "E7";
  c.title = "extrapolation to q in [5, 10]";
  std::vector<Variant> keep;
  for (const auto& v : c.variants)
    if (v.name == "mf" || v.name == "mf_unconstrained" || v.name == "mb_hw") keep.push_back(v);
  c.variants = keep;
  return c;
}

}  // namespace builtin

inline std::vector<std::string> builtin_ids() { return {"E1", "E2", "E3", "E4", "E5", "E6", "E7"}; }

inline ExperimentConfig builtin_experiment(const std::string& id) {
  if (id == "E1") return builtin::e1();
  if (id == "E2") return builtin::e2();
  if (id == "E3") return builtin::e3();
  if (id == "E4") return builtin::e4();
  if (id == "E5") return builtin::e5();
  if (id == "E6") return builtin::e6();
  if (id == "E7") return builtin::e7();
  throw ConfigurationError("unknown experiment '" + id + "' (expected one of E1..E7)");
}

}  // namespace pgnniv
