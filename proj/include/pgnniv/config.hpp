#pragma once

// Sectioned key/value text for network descriptions, data generators and
// training settings. Shared by run configs and checkpoints.
//
//   [network]            input_size, layers = 3:linear,15:relu,..., pil, model,
//                        input_scaling = lo:hi,...
//   [pipe]               PipeParams fields
//   [physical:<name>]    scale, initial
//   [constraint:<id>]    type, penalty, layer, ...
//   [data]               generator, M, ranges, noise, bias, normalize
//   [train]              iterations, batch_size, learning_rate, full_batch

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pgnniv/constraints.hpp"
#include "pgnniv/dataset.hpp"
#include "pgnniv/errors.hpp"
#include "pgnniv/network.hpp"
#include "pgnniv/text.hpp"
#include "pgnniv/training.hpp"

namespace pgnniv::config {

using Tree = boost::property_tree::ptree;

inline Tree read_tree(std::istream& is) {
  Tree t;
  try {
    boost::property_tree::ini_parser::read_ini(is, t);
  } catch (const boost::property_tree::ini_parser::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  return t;
}

inline Tree read_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_tree(is);
}

inline void write_file(const Tree& t, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  boost::property_tree::ini_parser::write_ini(os, t);
}

inline std::string to_text(const Tree& t) {
  std::ostringstream os;
  boost::property_tree::ini_parser::write_ini(os, t);
  return os.str();
}

// --- scalar helpers -----------------------------------------------------------

inline const Tree& section(const Tree& t, const std::string& name) {
  auto it = t.find(name);
  if (it == t.not_found()) throw ConfigurationError("missing section [" + name + "]");
  return it->second;
}

inline std::string get_string(const Tree& s, const std::string& key, const std::string& where) {
  auto v = s.get_optional<std::string>(key);
  if (!v) throw ConfigurationError("[" + where + "] lacks '" + key + "'");
  return *v;
}

inline double parse_number(const std::string& text, const std::string& what) {
  auto v = text::parse_double(text);
  if (!v) throw ConfigurationError(what + ": '" + text + "' is not a number");
  return *v;
}

inline double get_double(const Tree& s, const std::string& key, const std::string& where) {
  return parse_number(get_string(s, key, where), "[" + where + "] " + key);
}

inline double get_double(const Tree& s, const std::string& key, double fallback) {
  auto v = s.get_optional<std::string>(key);
  return v ? parse_number(*v, key) : fallback;
}

inline std::uint64_t parse_count(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size() || text.front() == '-') throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigurationError(what + ": '" + text + "' is not a non-negative integer");
  }
}

inline std::uint64_t get_count(const Tree& s, const std::string& key, const std::string& where) {
  return parse_count(get_string(s, key, where), "[" + where + "] " + key);
}

inline std::uint64_t get_count(const Tree& s, const std::string& key, std::uint64_t fallback) {
  auto v = s.get_optional<std::string>(key);
  return v ? parse_count(*v, key) : fallback;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  if (text::trim(text).empty()) return out;
  for (const auto& part : text::split(text, ',')) out.push_back(parse_number(text::trim(part), what));
  return out;
}

// --- pipe ---------------------------------------------------------------------

inline void put_pipe(Tree& t, const hydraulics::PipeParams& p, const std::string& name = "pipe") {
  Tree s;
  s.put("sigma1", text::format_double(p.sigma1));
  s.put("sigma2", text::format_double(p.sigma2));
  s.put("kappa1", text::format_double(p.kappa1));
  s.put("kappa2", text::format_double(p.kappa2));
  s.put("delta1", text::format_double(p.delta1));
  s.put("delta2", text::format_double(p.delta2));
  s.put("rho", text::format_double(p.rho));
  s.put("g", text::format_double(p.g));
  s.put("xi", text::format_double(p.xi));
  s.put("hw_lambda", text::format_double(p.hw_lambda));
  s.put("hw_alpha", text::format_double(p.hw_alpha));
  s.put("hw_beta", text::format_double(p.hw_beta));
  s.put("nu", text::format_double(p.nu));
  t.put_child(name, s);
}

/// Missing keys keep the fixed-geometry defaults.
inline hydraulics::PipeParams get_pipe(const Tree& t, const std::string& name = "pipe") {
  hydraulics::PipeParams p;
  auto it = t.find(name);
  if (it == t.not_found()) return p;
  const Tree& s = it->second;
  p.sigma1 = get_double(s, "sigma1", p.sigma1);
  p.sigma2 = get_double(s, "sigma2", p.sigma2);
  p.kappa1 = get_double(s, "kappa1", p.kappa1);
  p.kappa2 = get_double(s, "kappa2", p.kappa2);
  p.delta1 = get_double(s, "delta1", p.delta1);
  p.delta2 = get_double(s, "delta2", p.delta2);
  p.rho = get_double(s, "rho", p.rho);
  p.g = get_double(s, "g", p.g);
  p.xi = get_double(s, "xi", p.xi);
  p.hw_lambda = get_double(s, "hw_lambda", p.hw_lambda);
  p.hw_alpha = get_double(s, "hw_alpha", p.hw_alpha);
  p.hw_beta = get_double(s, "hw_beta", p.hw_beta);
  p.nu = get_double(s, "nu", p.nu);
  return p;
}

// --- network ------------------------------------------------------------------

inline void put_network(Tree& t, const NetworkSpec& spec) {
  Tree s;
  s.put("input_size", spec.input_size);
  std::vector<std::string> layers;
  for (const auto& l : spec.layers) layers.push_back(std::to_string(l.size) + ":" + to_string(l.activation));
  s.put("layers", text::join(layers, ","));
  std::vector<std::string> pils;
  for (std::size_t m : spec.pil_markers) pils.push_back(std::to_string(m));
  s.put("pil", text::join(pils, ","));
  s.put("model", to_string(spec.model_layer_kind));
  s.put("length_columns", std::to_string(spec.length_column_1) + "," + std::to_string(spec.length_column_2));
  if (!spec.input_scaling.empty()) {
    std::vector<std::string> ranges;
    for (const auto& [lo, hi] : spec.input_scaling) ranges.push_back(text::format_double(lo) + ":" + text::format_double(hi));
    s.put("input_scaling", text::join(ranges, ","));
  }
  t.put_child("network", s);
  put_pipe(t, spec.pipe);
  for (const auto& p : spec.physical_params) {
    Tree ps;
    ps.put("scale", text::format_double(p.scale));
    if (p.initial) ps.put("initial", text::format_double(*p.initial));
    t.put_child(boost::property_tree::path("physical:" + p.name, '/'), ps);
  }
}

inline NetworkSpec get_network(const Tree& t) {
  const Tree& s = section(t, "network");
  NetworkSpec spec;
  spec.input_size = get_count(s, "input_size", "network");
  for (const auto& entry : text::split(get_string(s, "layers", "network"), ',')) {
    const auto parts = text::split(text::trim(entry), ':');
    if (parts.size() != 2) throw ConfigurationError("[network] layers: expected size:activation, got '" + entry + "'");
    spec.layers.push_back({parse_count(parts[0], "[network] layers"), activation_from_string(parts[1])});
  }
  for (double m : parse_list(s.get<std::string>("pil", ""), "[network] pil")) {
    spec.pil_markers.insert(static_cast<std::size_t>(m));
  }
  spec.model_layer_kind = model_kind_from_string(s.get<std::string>("model", "none"));
  const auto lc = parse_list(s.get<std::string>("length_columns", "1,2"), "[network] length_columns");
  if (lc.size() != 2) throw ConfigurationError("[network] length_columns needs two entries");
  spec.length_column_1 = static_cast<std::size_t>(lc[0]);
  spec.length_column_2 = static_cast<std::size_t>(lc[1]);
  if (auto sc = s.get_optional<std::string>("input_scaling"); sc && !text::trim(*sc).empty()) {
    for (const auto& entry : text::split(*sc, ',')) {
      const auto parts = text::split(text::trim(entry), ':');
      if (parts.size() != 2) throw ConfigurationError("[network] input_scaling: expected lo:hi, got '" + entry + "'");
      spec.input_scaling.emplace_back(parse_number(parts[0], "[network] input_scaling"),
                                      parse_number(parts[1], "[network] input_scaling"));
    }
  }
  spec.pipe = get_pipe(t);
  for (const auto& [name, sub] : t) {
    if (name.rfind("physical:", 0) != 0) continue;
    PhysicalParamSpec p;
    p.name = name.substr(9);
    p.scale = get_double(sub, "scale", 1.0);
    if (auto init = sub.get_optional<std::string>("initial")) p.initial = parse_number(*init, name + " initial");
    spec.physical_params.push_back(p);
  }
  spec.validate();
  return spec;
}

// --- constraints --------------------------------------------------------------

inline std::string format_terms(const std::vector<LinearStateTerm>& terms) {
  // neuron:coefficient:offset[:column=weight...] separated by '|'
  std::vector<std::string> out;
  for (const auto& term : terms) {
    std::string s = std::to_string(term.neuron) + ":" + text::format_double(term.coefficient) + ":" +
                    text::format_double(term.offset);
    for (const auto& [c, w] : term.input_weights) s += ":" + std::to_string(c) + "=" + text::format_double(w);
    out.push_back(s);
  }
  return text::join(out, "|");
}

inline std::vector<LinearStateTerm> parse_terms(const std::string& text, const std::string& where) {
  std::vector<LinearStateTerm> out;
  for (const auto& chunk : text::split(text, '|')) {
    const auto parts = text::split(text::trim(chunk), ':');
    if (parts.size() < 3) throw ConfigurationError(where + ": malformed term '" + chunk + "'");
    LinearStateTerm term;
    term.neuron = parse_count(parts[0], where);
    term.coefficient = parse_number(parts[1], where);
    term.offset = parse_number(parts[2], where);
    for (std::size_t k = 3; k < parts.size(); ++k) {
      const auto eq = parts[k].find('=');
      if (eq == std::string::npos) throw ConfigurationError(where + ": malformed input weight '" + parts[k] + "'");
      term.input_weights.emplace_back(parse_count(parts[k].substr(0, eq), where),
                                      parse_number(parts[k].substr(eq + 1), where));
    }
    out.push_back(std::move(term));
  }
  return out;
}

inline void put_constraint(Tree& t, const ConstraintSpec& c) {
  Tree s;
  s.put("type", c.type);
  s.put("penalty", text::format_double(c.penalty));
  if (c.type == "flow_conservation") {
    s.put("layer", c.layer);
    s.put("areas", text::format_list(c.areas));
    s.put("input_column", c.input_column);
  } else if (c.type == "linear_state") {
    s.put("layer", c.layer);
    s.put("terms", format_terms(c.terms));
  } else if (c.type == "output_sum") {
    s.put("layer", c.layer);
    s.put("aux_column", c.aux_column);
  } else if (c.type == "param_lower_bound") {
    s.put("param", c.param);
    s.put("bound", text::format_double(c.bound));
  } else {
    s.put("layer", c.layer);
    s.put("neuron", c.neuron);
    s.put("bound", text::format_double(c.bound));
  }
  t.put_child(boost::property_tree::path("constraint:" + c.id, '/'), s);
}

inline std::vector<ConstraintSpec> get_constraints(const Tree& t) {
  std::vector<ConstraintSpec> out;
  for (const auto& [name, s] : t) {
    if (name.rfind("constraint:", 0) != 0) continue;
    ConstraintSpec c;
    c.id = name.substr(11);
    c.type = get_string(s, "type", name);
    c.penalty = get_double(s, "penalty", name);
    c.layer = get_count(s, "layer", std::uint64_t{0});
    c.areas = parse_list(s.get<std::string>("areas", ""), name + " areas");
    c.input_column = get_count(s, "input_column", std::uint64_t{0});
    if (auto terms = s.get_optional<std::string>("terms")) c.terms = parse_terms(*terms, name);
    c.aux_column = get_count(s, "aux_column", std::uint64_t{0});
    c.param = s.get<std::string>("param", "");
    c.neuron = get_count(s, "neuron", std::uint64_t{0});
    c.bound = get_double(s, "bound", 0.0);
    out.push_back(std::move(c));
  }
  return out;
}

/// Builds the network and registers every declared constraint.
inline Network build_from(const Tree& t, std::uint64_t seed) {
  Network net = build_network(get_network(t), seed);
  for (const auto& c : get_constraints(t)) register_constraint(net, make_constraint(c));
  return net;
}

// --- training -----------------------------------------------------------------

inline void put_hyper(Tree& t, const Hyper& h) {
  Tree s;
  s.put("iterations", h.iterations);
  s.put("batch_size", h.batch_size);
  s.put("learning_rate", text::format_double(h.learning_rate));
  s.put("full_batch", h.full_batch ? "true" : "false");
  t.put_child("train", s);
}

inline Hyper get_hyper(const Tree& t) {
  const Tree& s = section(t, "train");
  Hyper h;
  h.iterations = get_count(s, "iterations", "train");
  h.batch_size = get_count(s, "batch_size", std::uint64_t{h.batch_size});
  h.learning_rate = get_double(s, "learning_rate", "train");
  h.full_batch = s.get<std::string>("full_batch", "false") == "true";
  h.validate();
  return h;
}

// --- data ---------------------------------------------------------------------

/// Everything needed to build a training set from the oracle.
struct DataConfig {
  std::string generator = "prediction";  // prediction | geometry | characterization
  std::size_t m = 1000;
  Range q_range{1.0, 5.0};
  Range length_range{0.0, 10.0};
  Range kappa_range{80.0, 140.0};
  Range outlet_range{0.0, 5.0};
  TargetLayout layout = TargetLayout::Total;
  LossModel model = LossModel::HazenWilliams;
  double noise = 0.0;
  double bias = 0.0;
  bool normalize = false;
  hydraulics::PipeParams pipe;
};

inline void put_data(Tree& t, const DataConfig& d) {
  Tree s;
  s.put("generator", d.generator);
  s.put("M", d.m);
  s.put("q_range", text::format_double(d.q_range.lo) + "," + text::format_double(d.q_range.hi));
  s.put("length_range", text::format_double(d.length_range.lo) + "," + text::format_double(d.length_range.hi));
  s.put("kappa_range", text::format_double(d.kappa_range.lo) + "," + text::format_double(d.kappa_range.hi));
  s.put("outlet_range", text::format_double(d.outlet_range.lo) + "," + text::format_double(d.outlet_range.hi));
  s.put("targets", to_string(d.layout));
  s.put("model", to_string(d.model));
  s.put("noise", text::format_double(d.noise));
  s.put("bias", text::format_double(d.bias));
  s.put("normalize", d.normalize ? "true" : "false");
  t.put_child("data", s);
  put_pipe(t, d.pipe, "data_pipe");
}

inline Range get_range(const Tree& s, const std::string& key, Range fallback) {
  auto v = s.get_optional<std::string>(key);
  if (!v) return fallback;
  const auto xs = parse_list(*v, "[data] " + key);
  if (xs.size() != 2) throw ConfigurationError("[data] " + key + " needs two entries");
  return {xs[0], xs[1]};
}

inline DataConfig get_data(const Tree& t) {
  const Tree& s = section(t, "data");
  DataConfig d;
  d.generator = s.get<std::string>("generator", d.generator);
  d.m = get_count(s, "M", std::uint64_t{d.m});
  d.q_range = get_range(s, "q_range", d.q_range);
  d.length_range = get_range(s, "length_range", d.length_range);
  d.kappa_range = get_range(s, "kappa_range", d.kappa_range);
  d.outlet_range = get_range(s, "outlet_range", d.outlet_range);
  d.layout = target_layout_from_string(s.get<std::string>("targets", "total"));
  d.model = loss_model_from_string(s.get<std::string>("model", "hazen_williams"));
  d.noise = get_double(s, "noise", 0.0);
  d.bias = get_double(s, "bias", 0.0);
  d.normalize = s.get<std::string>("normalize", "false") == "true";
  d.pipe = get_pipe(t, "data_pipe");
  return d;
}

/// Clean data first, then noise (seeded), then bias, then optional scaling.
inline Dataset make_dataset(const DataConfig& d, std::uint64_t seed, Scaling* scaling = nullptr) {
  Dataset ds;
  if (d.generator == "prediction") {
    ds = generate_prediction_dataset(d.m, d.q_range, d.pipe, seed, d.layout, d.model);
  } else if (d.generator == "geometry") {
    ds = generate_geometry_dataset(d.m, d.q_range, d.length_range, d.pipe, seed);
  } else if (d.generator == "characterization") {
    ds = generate_characterization_dataset(d.m, d.q_range, d.kappa_range, d.pipe, seed, d.outlet_range);
  } else {
    throw ConfigurationError("unknown generator '" + d.generator + "'");
  }
  if (d.noise > 0.0) ds = add_noise(ds, d.noise, derive_seed(seed, "noise"));
  if (d.bias != 0.0) ds = add_bias(ds, d.bias);
  if (d.normalize) {
    auto [n, s] = normalize_minmax(ds);
    if (scaling) *scaling = s;
    ds = std::move(n);
  }
  return ds;
}

}  // namespace pgnniv::config
