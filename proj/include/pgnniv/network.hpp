#pragma once

// Dense feedforward networks with optional physics model layers.
//
// Layer i computes y_i = act(y_{i-1} W_i + b_i). A model layer replaces the
// dense map by a closed-form head-loss law whose coefficients are trainable
// physical parameters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pgnniv/autodiff.hpp"
#include "pgnniv/constraints.hpp"
#include "pgnniv/errors.hpp"
#include "pgnniv/hydraulics.hpp"
#include "pgnniv/random.hpp"

namespace pgnniv {

enum class Activation { Linear, Relu, ModelLayer };

enum class ModelLayerKind { None, HazenWilliams, DarcyWeisbach, GeometryIntegrator };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::ModelLayer: return "model";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "relu") return Activation::Relu;
  if (s == "model") return Activation::ModelLayer;
  throw ConfigurationError("unknown activation '" + s + "'");
}

inline std::string to_string(ModelLayerKind k) {
  switch (k) {
    case ModelLayerKind::None: return "none";
    case ModelLayerKind::HazenWilliams: return "hazen_williams";
    case ModelLayerKind::DarcyWeisbach: return "darcy_weisbach";
    case ModelLayerKind::GeometryIntegrator: return "geometry_integrator";
  }
  return "?";
}

inline ModelLayerKind model_kind_from_string(const std::string& s) {
  if (s == "none") return ModelLayerKind::None;
  if (s == "hazen_williams") return ModelLayerKind::HazenWilliams;
  if (s == "darcy_weisbach") return ModelLayerKind::DarcyWeisbach;
  if (s == "geometry_integrator") return ModelLayerKind::GeometryIntegrator;
  throw ConfigurationError("unknown model layer kind '" + s + "'");
}

struct LayerSpec {
  std::size_t size = 0;
  Activation activation = Activation::Linear;
};

/// A trainable physical coefficient. Gradient descent acts on the raw value
/// theta; the coefficient seen by the model is scale * theta.
struct PhysicalParamSpec {
  std::string name;
  double scale = 1.0;
  std::optional<double> initial;  // coefficient value, not theta
};

struct NetworkSpec {
  std::size_t input_size = 1;
  std::vector<LayerSpec> layers;     // y_1 .. y_L
  std::set<std::size_t> pil_markers; // indices into 1..L
  ModelLayerKind model_layer_kind = ModelLayerKind::None;
  std::vector<PhysicalParamSpec> physical_params;
  hydraulics::PipeParams pipe;               // geometry seen by model layers
  std::size_t length_column_1 = 1;           // geometry integrator inputs
  std::size_t length_column_2 = 2;
  /// Optional fixed min-max map (x - lo) / (hi - lo) per input column, applied
  /// only where the first dense layer reads the input. Constraints and model
  /// layers keep seeing the raw input y_0.
  std::vector<std::pair<double, double>> input_scaling;

  std::size_t depth() const { return layers.size(); }
  std::size_t output_size() const { return layers.empty() ? 0 : layers.back().size; }
  std::size_t layer_size(std::size_t i) const { return i == 0 ? input_size : layers.at(i - 1).size; }
  bool model_based() const {
    return model_layer_kind == ModelLayerKind::HazenWilliams || model_layer_kind == ModelLayerKind::DarcyWeisbach;
  }

  void validate() const {
    if (input_size == 0) throw ConfigurationError("network input size must be positive");
    if (layers.empty()) throw ConfigurationError("network has no layers");
    std::size_t model_layers = 0;
    for (std::size_t i = 1; i <= layers.size(); ++i) {
      const LayerSpec& l = layers[i - 1];
      if (l.size == 0) throw ConfigurationError("layer " + std::to_string(i) + " has zero neurons");
      if (l.activation != Activation::ModelLayer) continue;
      ++model_layers;
      const std::size_t prev = layer_size(i - 1);
      switch (model_layer_kind) {
        case ModelLayerKind::None:
          throw ConfigurationError("layer " + std::to_string(i) + " is a model layer but no model kind is set");
        case ModelLayerKind::HazenWilliams:
        case ModelLayerKind::DarcyWeisbach:
          if (prev != 3 || l.size != 3) {
            throw ConfigurationError("layer " + std::to_string(i) +
                                     ": head-loss model layers map 3 velocities to 3 pressure drops");
          }
          break;
        case ModelLayerKind::GeometryIntegrator:
          if (prev != 2 || l.size != 1) {
            throw ConfigurationError("layer " + std::to_string(i) +
                                     ": geometry integrator maps 2 pressure gradients to 1 drop");
          }
          if (length_column_1 >= input_size || length_column_2 >= input_size) {
            throw ConfigurationError("layer " + std::to_string(i) + ": length columns exceed the input size");
          }
          break;
      }
    }
    if (model_layers > 1) throw ConfigurationError("at most one model layer is supported");
    if ((model_layers == 1) != (model_layer_kind != ModelLayerKind::None)) {
      throw ConfigurationError("model_layer_kind is set but no layer uses the model activation");
    }
    if (model_based() && physical_params.size() != 3) {
      throw ConfigurationError("head-loss model layers need exactly three physical parameters");
    }
    if (!model_based() && !physical_params.empty()) {
      throw ConfigurationError("physical parameters require a head-loss model layer");
    }
    if (!input_scaling.empty()) {
      if (input_scaling.size() != input_size) {
        throw ConfigurationError("input scaling has " + std::to_string(input_scaling.size()) +
                                 " entries for " + std::to_string(input_size) + " inputs");
      }
      for (const auto& [lo, hi] : input_scaling) {
        if (!(hi > lo)) throw ConfigurationError("input scaling needs hi > lo for every column");
      }
    }
    for (const auto& p : physical_params) {
      if (!(p.scale > 0.0)) throw ConfigurationError("physical parameter '" + p.name + "' needs a positive scale");
    }
    for (std::size_t m : pil_markers) {
      if (m == 0 || m > layers.size()) {
        throw ConfigurationError("PIL marker " + std::to_string(m) + " is not a layer index in 1.." +
                                 std::to_string(layers.size()));
      }
    }
  }
};

inline std::string weight_id(std::size_t layer) { return "W" + std::to_string(layer); }
inline std::string bias_id(std::size_t layer) { return "b" + std::to_string(layer); }

class Network {
 public:
  Network(NetworkSpec spec, std::vector<Param> params) : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
  }

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }

  const Param& param(const std::string& id) const {
    auto it = std::find_if(params_.begin(), params_.end(), [&](const Param& p) { return p.id() == id; });
    if (it == params_.end()) throw ContractError("network has no parameter '" + id + "'");
    return *it;
  }
  Param& param(const std::string& id) { return const_cast<Param&>(std::as_const(*this).param(id)); }
  bool has_param(const std::string& id) const {
    return std::any_of(params_.begin(), params_.end(), [&](const Param& p) { return p.id() == id; });
  }

  const std::vector<Constraint>& constraints() const noexcept { return constraints_; }
  std::vector<Constraint>& constraints() noexcept { return constraints_; }

  /// Physical coefficient value (scale * theta).
  double physical_value(const PhysicalParamSpec& p) const { return p.scale * param(p.name).value()[0]; }

  /// Records every layer of one forward evaluation on `tape`.
  ForwardPass forward(Tape& tape, const Matrix& inputs, const Matrix* aux = nullptr) const {
    if (inputs.cols() != spec_.input_size) {
      throw ContractError("input has " + std::to_string(inputs.cols()) + " columns, network expects " +
                          std::to_string(spec_.input_size));
    }
    ForwardPass f;
    f.layers.reserve(spec_.depth() + 1);
    f.layers.push_back(tape.constant(inputs));
    if (aux != nullptr) f.aux = tape.constant(*aux);
    for (const auto& p : spec_.physical_params) f.physical[p.name] = scale(tape.parameter(param(p.name)), p.scale);

    for (std::size_t i = 1; i <= spec_.depth(); ++i) {
      const LayerSpec& l = spec_.layers[i - 1];
      Var prev = f.layers.back();
      if (i == 1 && !spec_.input_scaling.empty()) prev = tape.constant(scaled_input(inputs));
      if (l.activation == Activation::ModelLayer) {
        f.layers.push_back(model_layer(f, prev));
        continue;
      }
      Var z = add_row(matmul(prev, tape.parameter(param(weight_id(i)))), tape.parameter(param(bias_id(i))));
      f.layers.push_back(l.activation == Activation::Relu ? relu(z) : z);
    }
    return f;
  }

  /// Values of y_0 .. y_L for `inputs`.
  std::vector<Matrix> evaluate(const Matrix& inputs) const {
    Tape tape;
    ForwardPass f = forward(tape, inputs);
    std::vector<Matrix> out;
    out.reserve(f.layers.size());
    for (Var v : f.layers) out.push_back(v.value());
    return out;
  }

 private:
  Matrix scaled_input(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const auto [lo, hi] = spec_.input_scaling[c];
        out(r, c) = (x(r, c) - lo) / (hi - lo);
      }
    return out;
  }

  Var model_layer(const ForwardPass& f, Var prev) const {
    const auto& pipe = spec_.pipe;
    switch (spec_.model_layer_kind) {
      case ModelLayerKind::GeometryIntegrator: {
        Var l1 = column(f.input(), spec_.length_column_1);
        Var l2 = column(f.input(), spec_.length_column_2);
        return add(mul(column(prev, 0), l1), mul(column(prev, 1), l2));
      }
      case ModelLayerKind::HazenWilliams:
      case ModelLayerKind::DarcyWeisbach: {
        Var lam1 = f.physical.at(spec_.physical_params[0].name);
        Var lam2 = f.physical.at(spec_.physical_params[1].name);
        Var lam3 = f.physical.at(spec_.physical_params[2].name);
        Var v1 = column(prev, 1);
        Var v2 = column(prev, 2);
        Var dp1, dp2;
        if (spec_.model_layer_kind == ModelLayerKind::HazenWilliams) {
          // gamma * lam * (v sigma)^alpha * delta; odd extension keeps reversed flow defined.
          const double gamma = pipe.gamma();
          dp1 = scale(scale_by(signed_pow(scale(v1, pipe.sigma1), pipe.hw_alpha), lam2), gamma * pipe.delta1);
          dp2 = scale(scale_by(signed_pow(scale(v2, pipe.sigma2), pipe.hw_alpha), lam3), gamma * pipe.delta2);
        } else {
          // Laminar Darcy-Weisbach: 32 rho (nu / D) v delta / D.
          const double d1 = hydraulics::hydraulic_diameter(pipe.sigma1);
          const double d2 = hydraulics::hydraulic_diameter(pipe.sigma2);
          dp1 = scale(scale_by(v1, lam2), 32.0 * pipe.rho * pipe.delta1 / d1);
          dp2 = scale(scale_by(v2, lam3), 32.0 * pipe.rho * pipe.delta2 / d2);
        }
        // Borda-Carnot with Bernoulli recovery: rho/2 [(v2^2 - v1^2) + xi (v1 - v2)^2].
        Var dpe = scale(add(sub(square(v2), square(v1)), scale_by(square(sub(v1, v2)), lam1)), 0.5 * pipe.rho);
        const Var parts[] = {dp1, dpe, dp2};
        return concat_columns(parts);
      }
      case ModelLayerKind::None:
        break;
    }
    throw ContractError("model layer evaluated without a model kind");
  }

  NetworkSpec spec_;
  std::vector<Param> params_;
  std::vector<Constraint> constraints_;
};

/// Allocates and initializes all parameters. Dense weights are uniform in
/// [-a, a] with a = sqrt(6 / (fan_in + fan_out)); biases start at zero.
/// Physical parameters start at their explicit initial value or at
/// scale * U(0, 1].
inline Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = make_rng(seed, "init");
  std::vector<Param> params;
  for (std::size_t i = 1; i <= spec.depth(); ++i) {
    const LayerSpec& l = spec.layers[i - 1];
    if (l.activation == Activation::ModelLayer) continue;
    const std::size_t fan_in = spec.layer_size(i - 1), fan_out = l.size;
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    Matrix w(fan_in, fan_out);
    for (double& x : w.values()) x = u(rng);
    params.emplace_back(weight_id(i), std::move(w));
    params.emplace_back(bias_id(i), Matrix(1, fan_out, 0.0));
  }
  for (const auto& p : spec.physical_params) {
    double theta;
    if (p.initial) {
      theta = *p.initial / p.scale;
    } else {
      // 1 - U[0,1) lies in (0, 1].
      theta = 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    params.emplace_back(p.name, Matrix::scalar(theta));
  }
  return Network(spec, std::move(params));
}

/// Adds a constraint after checking every layer and parameter it references.
inline Network& register_constraint(Network& net, Constraint c) {
  const auto& spec = net.spec();
  for (std::size_t l : c.layers) {
    if (l > spec.depth()) {
      throw ConfigurationError("constraint '" + c.id + "' references layer " + std::to_string(l) +
                               " but the network has " + std::to_string(spec.depth()) + " layers");
    }
  }
  if (c.spec && (c.spec->type == "flow_conservation" || c.spec->type == "linear_state" ||
                 c.spec->type == "neuron_upper_bound" || c.spec->type == "neuron_lower_bound")) {
    const std::size_t width = spec.layer_size(c.spec->layer);
    auto check_neuron = [&](std::size_t n) {
      if (n >= width) {
        throw ConfigurationError("constraint '" + c.id + "' references neuron " + std::to_string(n) +
                                 " of layer " + std::to_string(c.spec->layer) + " which has " +
                                 std::to_string(width));
      }
    };
    if (c.spec->type == "flow_conservation") {
      if (c.spec->areas.size() > width) check_neuron(c.spec->areas.size() - 1);
      if (c.spec->input_column >= spec.input_size) {
        throw ConfigurationError("constraint '" + c.id + "' references input column " +
                                 std::to_string(c.spec->input_column));
      }
    }
    for (const auto& t : c.spec->terms) {
      check_neuron(t.neuron);
      for (const auto& [col, w] : t.input_weights) {
        if (col >= spec.input_size) {
          throw ConfigurationError("constraint '" + c.id + "' references input column " + std::to_string(col));
        }
      }
    }
    if (c.spec->type != "flow_conservation" && c.spec->type != "linear_state") check_neuron(c.spec->neuron);
  }
  for (const auto& name : c.parameters) {
    const bool known = std::any_of(spec.physical_params.begin(), spec.physical_params.end(),
                                   [&](const PhysicalParamSpec& p) { return p.name == name; });
    if (!known) throw ConfigurationError("constraint '" + c.id + "' references unknown parameter '" + name + "'");
  }
  if (c.penalty_weight < 0.0) throw ConfigurationError("constraint '" + c.id + "' has a negative penalty weight");
  for (const auto& existing : net.constraints()) {
    if (existing.id == c.id) throw ConfigurationError("duplicate constraint id '" + c.id + "'");
  }
  net.constraints().push_back(std::move(c));
  return net;
}

}  // namespace pgnniv
