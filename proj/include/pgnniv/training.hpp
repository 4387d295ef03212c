#pragma once

// Penalty objective, plain SGD training loop, and read-out of trained nets.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pgnniv/autodiff.hpp"
#include "pgnniv/constraints.hpp"
#include "pgnniv/dataset.hpp"
#include "pgnniv/errors.hpp"
#include "pgnniv/network.hpp"
#include "pgnniv/random.hpp"

namespace pgnniv {

/// Inputs, targets and optional side-channel columns, one row per record.
struct TrainingData {
  Matrix inputs;
  Matrix targets;
  std::optional<Matrix> aux;

  std::size_t rows() const noexcept { return inputs.rows(); }

  static TrainingData from(const Dataset& ds) {
    TrainingData d{ds.inputs(), ds.targets(), std::nullopt};
    if (!ds.columns_with(ColumnRole::Aux).empty()) d.aux = ds.aux();
    return d;
  }
};

struct LossValues {
  double mse = 0.0;
  double pen = 0.0;
  double of = 0.0;
};

/// Objective nodes of one forward evaluation.
struct Objective {
  ForwardPass forward;
  Var mse;
  Var pen;
  Var of;

  LossValues values() const { return {mse.value()[0], pen.value()[0], of.value()[0]}; }
};

/// MSE = (1/N) sum ||y - Y||^2, PEN = sum_j p_j ||R_j||^2 / N, OF = MSE + PEN.
/// Constraints with p_j = 0 are not evaluated at all.
inline Objective build_objective(Tape& tape, const Network& net, const Matrix& inputs, const Matrix& targets,
                                 const Matrix* aux = nullptr) {
  if (inputs.rows() == 0) throw ContractError("loss needs a non-empty batch");
  if (targets.rows() != inputs.rows()) {
    throw ContractError("batch has " + std::to_string(inputs.rows()) + " inputs but " +
                        std::to_string(targets.rows()) + " targets");
  }
  if (targets.cols() != net.spec().output_size()) {
    throw ContractError("targets have " + std::to_string(targets.cols()) + " columns, network outputs " +
                        std::to_string(net.spec().output_size()));
  }
  Objective o{net.forward(tape, inputs, aux), {}, {}, {}};
  const double n = static_cast<double>(inputs.rows());
  o.mse = scale(sum(square(sub(o.forward.output(), tape.constant(targets)))), 1.0 / n);
  o.pen = tape.constant(Matrix::scalar(0.0));
  for (const Constraint& c : net.constraints()) {
    if (c.penalty_weight == 0.0) continue;
    if (c.uses_aux && !o.forward.aux) throw ContractError("constraint '" + c.id + "' needs auxiliary columns");
    o.pen = add(o.pen, penalty_term(c, o.forward));
  }
  o.of = add(o.mse, o.pen);
  return o;
}

inline LossValues loss(const Network& net, const Matrix& inputs, const Matrix& targets, const Matrix* aux = nullptr) {
  Tape tape;
  return build_objective(tape, net, inputs, targets, aux).values();
}

inline LossValues loss(const Network& net, const TrainingData& d) {
  return loss(net, d.inputs, d.targets, d.aux ? &*d.aux : nullptr);
}

struct Hyper {
  std::size_t iterations = 1000;    // N
  std::size_t batch_size = 4;       // n
  double learning_rate = 1e-3;      // beta
  bool full_batch = false;          // use every record each step instead of sampling
  double divergence_limit = 1e12;

  void validate() const {
    if (iterations == 0) throw ConfigurationError("iterations must be positive");
    if (!full_batch && batch_size == 0) throw ConfigurationError("batch size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigurationError("learning rate must be positive");
  }
};

struct TraceRecord {
  std::size_t iteration = 0;  // 1-based
  double mse = 0.0;
  double pen = 0.0;
  double of = 0.0;
};

struct TrainingTrace {
  std::vector<TraceRecord> records;
  std::map<std::string, double> metrics;
  bool diverged = false;
  std::size_t divergence_iteration = 0;

  std::size_t size() const noexcept { return records.size(); }
};

/// Divergence carrying whatever was recorded before the guard fired.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, std::size_t iteration, TrainingTrace partial)
      : DivergenceError(what, iteration), trace_(std::move(partial)) {}
  const TrainingTrace& trace() const noexcept { return trace_; }

 private:
  TrainingTrace trace_;
};

/// Called after every parameter update with the 1-based iteration number.
using IterationHook = std::function<void(std::size_t, const Network&)>;

namespace detail {

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(idx[i], j);
  return out;
}

}  // namespace detail

/// N steps of: sample n records uniformly with replacement, evaluate OF,
/// backpropagate, update every parameter. The record of step k holds the
/// objective evaluated on that step's batch before its update.
inline TrainingTrace train(Network& net, const TrainingData& data, const Hyper& hyper, std::uint64_t seed,
                           const IterationHook& hook = {}) {
  hyper.validate();
  if (data.rows() == 0) throw ContractError("training set is empty");
  if (data.targets.rows() != data.rows()) throw ContractError("inputs and targets differ in length");
  Rng rng = make_rng(seed, "batch");
  std::uniform_int_distribution<std::size_t> pick(0, data.rows() - 1);
  TrainingTrace trace;
  trace.records.reserve(hyper.iterations);
  std::vector<std::size_t> idx(hyper.full_batch ? data.rows() : hyper.batch_size);
  for (std::size_t k = 0; k < idx.size() && hyper.full_batch; ++k) idx[k] = k;
  const Matrix* full_aux = data.aux ? &*data.aux : nullptr;

  for (std::size_t it = 1; it <= hyper.iterations; ++it) {
    Matrix xb, yb, ab;
    const Matrix *x = &data.inputs, *y = &data.targets, *a = full_aux;
    if (!hyper.full_batch) {
      for (auto& i : idx) i = pick(rng);
      xb = detail::gather_rows(data.inputs, idx);
      yb = detail::gather_rows(data.targets, idx);
      x = &xb;
      y = &yb;
      if (full_aux) {
        ab = detail::gather_rows(*full_aux, idx);
        a = &ab;
      }
    }
    Tape tape;
    Objective o = build_objective(tape, net, *x, *y, a);
    const LossValues v = o.values();
    trace.records.push_back({it, v.mse, v.pen, v.of});
    if (!std::isfinite(v.of) || v.of > hyper.divergence_limit) {
      trace.diverged = true;
      trace.divergence_iteration = it;
      throw TrainingDiverged("training diverged at iteration " + std::to_string(it) + " (OF = " +
                                 text::format_double(v.of, 6) + ")",
                             it, std::move(trace));
    }
    const Gradients g = backward(tape, o.of);
    sgd_step(net.params(), g, hyper.learning_rate);
    if (hook) hook(it, net);
  }
  return trace;
}

inline TrainingTrace train(Network& net, const Dataset& ds, const Hyper& hyper, std::uint64_t seed,
                           const IterationHook& hook = {}) {
  return train(net, TrainingData::from(ds), hyper, seed, hook);
}

struct Prediction {
  Matrix outputs;
  std::map<std::size_t, Matrix> pils;  // keyed by layer index
};

/// Forward pass returning the output layer and every PIL.
inline Prediction predict(const Network& net, const Matrix& inputs) {
  const auto layers = net.evaluate(inputs);
  Prediction p{layers.back(), {}};
  for (std::size_t l : net.spec().pil_markers) p.pils.emplace(l, layers.at(l));
  return p;
}

/// Current physical coefficients of a model-based network, in spec order.
inline std::vector<std::pair<std::string, double>> extract_parameters(const Network& net) {
  if (!net.spec().model_based()) throw ContractError("extract_parameters needs a model-based network");
  std::vector<std::pair<std::string, double>> out;
  for (const auto& p : net.spec().physical_params) out.emplace_back(p.name, net.physical_value(p));
  return out;
}

/// Probe evaluations: input columns, then every PIL neuron, then outputs.
struct StateTable {
  std::vector<std::string> columns;
  Matrix rows;
};

inline StateTable export_state_relation(const Network& net, const Matrix& probes) {
  const auto& spec = net.spec();
  StateTable t;
  for (std::size_t j = 0; j < spec.input_size; ++j) t.columns.push_back("x" + std::to_string(j));
  for (std::size_t l : spec.pil_markers)
    for (std::size_t k = 0; k < spec.layer_size(l); ++k)
      t.columns.push_back("y" + std::to_string(l) + "_" + std::to_string(k));
  for (std::size_t k = 0; k < spec.output_size(); ++k) t.columns.push_back("out" + std::to_string(k));
  t.rows = Matrix(probes.rows(), t.columns.size());
  if (probes.rows() == 0) return t;
  const auto layers = net.evaluate(probes);
  for (std::size_t i = 0; i < probes.rows(); ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < probes.cols(); ++j) t.rows(i, c++) = probes(i, j);
    for (std::size_t l : spec.pil_markers)
      for (std::size_t k = 0; k < spec.layer_size(l); ++k) t.rows(i, c++) = layers[l](i, k);
    for (std::size_t k = 0; k < spec.output_size(); ++k) t.rows(i, c++) = layers.back()(i, k);
  }
  return t;
}

}  // namespace pgnniv
