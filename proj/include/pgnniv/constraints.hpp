#pragma once

// Physical constraints attached to predefined internal layers (PILs).
//
// A constraint produces a residual matrix from one forward pass. Equality
// constraints contribute p * |R|^2, inequality constraints f <= 0 contribute
// p * |relu(f)|^2, both averaged over the residual rows (the batch).

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pgnniv/autodiff.hpp"
#include "pgnniv/errors.hpp"

namespace pgnniv {

/// Node handles of one forward evaluation: layers[0] is the network input.
struct ForwardPass {
  std::vector<Var> layers;
  std::optional<Var> aux;                 // side-channel measurements, n x k
  std::map<std::string, Var> physical;    // trainable physical parameters, 1x1 each

  Var input() const { return layers.front(); }
  Var output() const { return layers.back(); }
};

enum class ConstraintKind { Equality, Inequality };

/// y[:, neuron] * coefficient - (offset + sum_c weight_c * x[:, c])
struct LinearStateTerm {
  std::size_t neuron = 0;
  double coefficient = 1.0;
  double offset = 0.0;
  std::vector<std::pair<std::size_t, double>> input_weights;
};

/// Declarative description; every built-in constraint round-trips through it.
struct ConstraintSpec {
  std::string id;
  std::string type;  // flow_conservation | linear_state | output_sum | param_lower_bound | neuron_upper_bound | neuron_lower_bound
  double penalty = 0.0;
  std::size_t layer = 0;
  std::vector<double> areas;        // flow_conservation
  std::size_t input_column = 0;     // flow_conservation
  std::vector<LinearStateTerm> terms;  // linear_state
  std::size_t aux_column = 0;       // output_sum
  std::string param;                // param_lower_bound
  std::size_t neuron = 0;           // neuron bounds
  double bound = 0.0;
};

using ResidualFn = std::function<Var(const ForwardPass&)>;

struct Constraint {
  std::string id;
  ConstraintKind kind = ConstraintKind::Equality;
  double penalty_weight = 0.0;
  std::vector<std::size_t> layers;        // referenced layer indices (validated on registration)
  std::vector<std::string> parameters;    // referenced physical parameters
  bool uses_aux = false;
  ResidualFn residual;
  std::optional<ConstraintSpec> spec;     // empty for ad-hoc residuals
};

namespace detail {

inline Var linear_state_residual(const ForwardPass& f, std::size_t layer, const std::vector<LinearStateTerm>& terms) {
  Tape& tape = f.input().tape();
  const Matrix& x = f.input().value();
  std::vector<Var> cols;
  cols.reserve(terms.size());
  for (const auto& t : terms) {
    Matrix rhs(x.rows(), 1, t.offset);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (const auto& [c, w] : t.input_weights) rhs[i] += w * x(i, c);
    Var y = column(f.layers.at(layer), t.neuron);
    cols.push_back(sub(scale(y, t.coefficient), tape.constant(std::move(rhs))));
  }
  return concat_columns(cols);
}

}  // namespace detail

/// R_k = coefficient_k * y_layer[:, neuron_k] - (offset_k + sum_c w_c x[:, c]).
/// The input dependence is constant with respect to the weights.
inline Constraint linear_state_constraint(std::string id, std::size_t layer, std::vector<LinearStateTerm> terms,
                                          double penalty) {
  if (terms.empty()) throw ConfigurationError("linear_state constraint '" + id + "' has no terms");
  ConstraintSpec spec{.id = id, .type = "linear_state", .penalty = penalty, .layer = layer, .terms = terms};
  Constraint c{.id = std::move(id), .kind = ConstraintKind::Equality, .penalty_weight = penalty, .layers = {layer}};
  c.residual = [layer, terms = std::move(terms)](const ForwardPass& f) {
    return detail::linear_state_residual(f, layer, terms);
  };
  c.spec = std::move(spec);
  return c;
}

/// Mass conservation on a velocity PIL: v_i * area_i - q = 0 for every neuron i.
inline Constraint flow_conservation(std::string id, std::size_t layer, std::vector<double> areas,
                                    std::size_t q_column, double penalty) {
  std::vector<LinearStateTerm> terms;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    if (!(areas[i] > 0.0)) throw ConfigurationError("flow_conservation '" + id + "': areas must be positive");
    terms.push_back({.neuron = i, .coefficient = areas[i], .offset = 0.0, .input_weights = {{q_column, 1.0}}});
  }
  Constraint c = linear_state_constraint(id, layer, std::move(terms), penalty);
  c.spec->type = "flow_conservation";
  c.spec->terms.clear();
  c.spec->areas = std::move(areas);
  c.spec->input_column = q_column;
  return c;
}

/// sum_k y_layer[:, k] - aux[:, aux_column] = 0 (e.g. segment drops adding up to a measured total).
inline Constraint output_sum(std::string id, std::size_t layer, std::size_t aux_column, double penalty) {
  ConstraintSpec spec{.id = id, .type = "output_sum", .penalty = penalty, .layer = layer, .aux_column = aux_column};
  Constraint c{.id = std::move(id), .kind = ConstraintKind::Equality, .penalty_weight = penalty, .layers = {layer}};
  c.uses_aux = true;
  c.residual = [layer, aux_column](const ForwardPass& f) {
    Var y = f.layers.at(layer);
    Var total = column(y, 0);
    for (std::size_t k = 1; k < y.shape().cols; ++k) total = add(total, column(y, k));
    return sub(total, column(*f.aux, aux_column));
  };
  c.spec = std::move(spec);
  return c;
}

/// Inequality lambda >= bound, encoded as relu(bound - lambda) -> 0.
inline Constraint param_lower_bound(std::string id, std::string param, double bound, double penalty) {
  ConstraintSpec spec{.id = id, .type = "param_lower_bound", .penalty = penalty, .param = param, .bound = bound};
  Constraint c{.id = std::move(id), .kind = ConstraintKind::Inequality, .penalty_weight = penalty};
  c.parameters = {param};
  c.residual = [param, bound](const ForwardPass& f) { return add_scalar(scale(f.physical.at(param), -1.0), bound); };
  c.spec = std::move(spec);
  return c;
}

/// Inequality y_layer[:, neuron] <= bound.
inline Constraint neuron_upper_bound(std::string id, std::size_t layer, std::size_t neuron, double bound,
                                     double penalty) {
  ConstraintSpec spec{.id = id, .type = "neuron_upper_bound", .penalty = penalty, .layer = layer, .neuron = neuron,
                      .bound = bound};
  Constraint c{.id = std::move(id), .kind = ConstraintKind::Inequality, .penalty_weight = penalty, .layers = {layer}};
  c.residual = [layer, neuron, bound](const ForwardPass& f) {
    return add_scalar(column(f.layers.at(layer), neuron), -bound);
  };
  c.spec = std::move(spec);
  return c;
}

/// Inequality y_layer[:, neuron] >= bound.
inline Constraint neuron_lower_bound(std::string id, std::size_t layer, std::size_t neuron, double bound,
                                     double penalty) {
  ConstraintSpec spec{.id = id, .type = "neuron_lower_bound", .penalty = penalty, .layer = layer, .neuron = neuron,
                      .bound = bound};
  Constraint c{.id = std::move(id), .kind = ConstraintKind::Inequality, .penalty_weight = penalty, .layers = {layer}};
  c.residual = [layer, neuron, bound](const ForwardPass& f) {
    return add_scalar(scale(column(f.layers.at(layer), neuron), -1.0), bound);
  };
  c.spec = std::move(spec);
  return c;
}

inline Constraint make_constraint(const ConstraintSpec& s) {
  if (s.type == "flow_conservation") return flow_conservation(s.id, s.layer, s.areas, s.input_column, s.penalty);
  if (s.type == "linear_state") return linear_state_constraint(s.id, s.layer, s.terms, s.penalty);
  if (s.type == "output_sum") return output_sum(s.id, s.layer, s.aux_column, s.penalty);
  if (s.type == "param_lower_bound") return param_lower_bound(s.id, s.param, s.bound, s.penalty);
  if (s.type == "neuron_upper_bound") return neuron_upper_bound(s.id, s.layer, s.neuron, s.bound, s.penalty);
  if (s.type == "neuron_lower_bound") return neuron_lower_bound(s.id, s.layer, s.neuron, s.bound, s.penalty);
  throw ConfigurationError("unknown constraint type '" + s.type + "' for constraint '" + s.id + "'");
}

/// p * |R|^2 (or p * |relu(R)|^2) divided by the number of residual rows.
inline Var penalty_term(const Constraint& c, const ForwardPass& f) {
  Var r = c.residual(f);
  if (c.kind == ConstraintKind::Inequality) r = relu(r);
  const double rows = static_cast<double>(r.shape().rows);
  return scale(sum(square(r)), c.penalty_weight / rows);
}

}  // namespace pgnniv
