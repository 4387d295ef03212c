#pragma once

// Synthetic data sets drawn from the head-loss oracle, their perturbations
// (noise, bias, min-max scaling) and a plain-text persisted form.
//
// File layout:
//
//   #pgnniv-dataset 1
//   #provenance <key> <value>        (one per line, in generation order)
//   #column <name> <unit> <role> <measured|latent>
//   <name>,<name>,...
//   <v>,<v>,...                      (17 significant digits)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pgnniv/errors.hpp"
#include "pgnniv/hydraulics.hpp"
#include "pgnniv/matrix.hpp"
#include "pgnniv/random.hpp"
#include "pgnniv/text.hpp"

namespace pgnniv {

enum class ColumnRole { Input, Target, Aux };

inline std::string to_string(ColumnRole r) {
  switch (r) {
    case ColumnRole::Input: return "input";
    case ColumnRole::Target: return "target";
    case ColumnRole::Aux: return "aux";
  }
  return "?";
}

struct Column {
  std::string name;
  std::string unit;
  ColumnRole role = ColumnRole::Input;
  bool measured = true;  // only measured columns receive noise and bias

  friend bool operator==(const Column&, const Column&) = default;
};

/// Ordered key/value pairs describing how a data set was produced.
using Provenance = std::vector<std::pair<std::string, std::string>>;

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void validate(const std::string& what) const {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
      throw ConfigurationError("invalid " + what + " range [" + text::format_double(lo) + ", " +
                               text::format_double(hi) + "]");
    }
  }
  friend bool operator==(const Range&, const Range&) = default;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Column> schema, Matrix data, Provenance provenance)
      : schema_(std::move(schema)), data_(std::move(data)), provenance_(std::move(provenance)) {
    if (data_.cols() != schema_.size()) throw SchemaError("data width does not match the schema");
  }

  const std::vector<Column>& schema() const noexcept { return schema_; }
  const Matrix& data() const noexcept { return data_; }
  Matrix& mutable_data() noexcept { return data_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  Provenance& mutable_provenance() noexcept { return provenance_; }
  std::size_t rows() const noexcept { return data_.rows(); }

  std::optional<std::string> provenance_value(const std::string& key) const {
    for (const auto& [k, v] : provenance_)
      if (k == key) return v;
    return std::nullopt;
  }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t j = 0; j < schema_.size(); ++j)
      if (schema_[j].name == name) return j;
    throw SchemaError("data set has no column '" + name + "'");
  }

  std::vector<double> column(const std::string& name) const {
    const std::size_t j = column_index(name);
    std::vector<double> out(rows());
    for (std::size_t i = 0; i < rows(); ++i) out[i] = data_(i, j);
    return out;
  }

  std::vector<std::size_t> columns_with(ColumnRole role) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < schema_.size(); ++j)
      if (schema_[j].role == role) out.push_back(j);
    return out;
  }

  std::vector<std::string> names_with(ColumnRole role) const {
    std::vector<std::string> out;
    for (std::size_t j : columns_with(role)) out.push_back(schema_[j].name);
    return out;
  }

  Matrix block(ColumnRole role) const {
    const auto cols = columns_with(role);
    Matrix out(rows(), cols.size());
    for (std::size_t i = 0; i < rows(); ++i)
      for (std::size_t k = 0; k < cols.size(); ++k) out(i, k) = data_(i, cols[k]);
    return out;
  }
  Matrix inputs() const { return block(ColumnRole::Input); }
  Matrix targets() const { return block(ColumnRole::Target); }
  Matrix aux() const { return block(ColumnRole::Aux); }

  /// Throws SchemaError naming the first required column that is absent.
  void require_columns(const std::vector<std::string>& names) const {
    for (const auto& n : names) column_index(n);
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<Column> schema_;
  Matrix data_;
  Provenance provenance_;
};

// ---------------------------------------------------------------------------
// Generators

enum class TargetLayout { Total, Segments, SegmentsWithTotal };

inline std::string to_string(TargetLayout t) {
  switch (t) {
    case TargetLayout::Total: return "total";
    case TargetLayout::Segments: return "segments";
    case TargetLayout::SegmentsWithTotal: return "segments_with_total";
  }
  return "?";
}

inline TargetLayout target_layout_from_string(const std::string& s) {
  if (s == "total") return TargetLayout::Total;
  if (s == "segments") return TargetLayout::Segments;
  if (s == "segments_with_total") return TargetLayout::SegmentsWithTotal;
  throw ConfigurationError("unknown target layout '" + s + "'");
}

enum class LossModel { HazenWilliams, DarcyWeisbach };

inline std::string to_string(LossModel m) {
  return m == LossModel::HazenWilliams ? "hazen_williams" : "darcy_weisbach";
}

inline LossModel loss_model_from_string(const std::string& s) {
  if (s == "hazen_williams") return LossModel::HazenWilliams;
  if (s == "darcy_weisbach") return LossModel::DarcyWeisbach;
  throw ConfigurationError("unknown loss model '" + s + "'");
}

namespace detail {

inline void append_pipe(Provenance& p, const hydraulics::PipeParams& pp) {
  auto put = [&](const char* k, double v) { p.emplace_back(std::string("pipe.") + k, text::format_double(v)); };
  put("sigma1", pp.sigma1);
  put("sigma2", pp.sigma2);
  put("kappa1", pp.kappa1);
  put("kappa2", pp.kappa2);
  put("delta1", pp.delta1);
  put("delta2", pp.delta2);
  put("rho", pp.rho);
  put("g", pp.g);
  put("xi", pp.xi);
  put("hw_lambda", pp.hw_lambda);
  put("hw_alpha", pp.hw_alpha);
  put("hw_beta", pp.hw_beta);
  put("nu", pp.nu);
}

inline void check_rows(std::size_t m) {
  if (m < 1) throw ConfigurationError("data set size M must be at least 1");
}

inline std::string fmt(double v) { return text::format_double(v); }

}  // namespace detail

inline hydraulics::SegmentDrops segment_drops(double q, const hydraulics::PipeParams& p, LossModel model) {
  return model == LossModel::HazenWilliams ? hydraulics::segment_pressure_drops(q, p)
                                           : hydraulics::segment_pressure_drops_darcy(q, p);
}

/// q -> total drop, or q -> per-segment drops (optionally with the measured
/// total as an auxiliary column), q uniform in `q_range`.
inline Dataset generate_prediction_dataset(std::size_t m, Range q_range, const hydraulics::PipeParams& params,
                                           std::uint64_t seed, TargetLayout layout = TargetLayout::Total,
                                           LossModel model = LossModel::HazenWilliams) {
  detail::check_rows(m);
  q_range.validate("flow");
  if (!(q_range.lo > 0.0)) throw ConfigurationError("flow range must be positive");
  params.validate();
  std::vector<Column> schema{{"q", "m^3/s", ColumnRole::Input, true}};
  if (layout == TargetLayout::Total) {
    schema.push_back({"dp", "Pa", ColumnRole::Target, true});
  } else {
    schema.push_back({"dp1", "Pa", ColumnRole::Target, true});
    schema.push_back({"dpe", "Pa", ColumnRole::Target, true});
    schema.push_back({"dp2", "Pa", ColumnRole::Target, true});
    if (layout == TargetLayout::SegmentsWithTotal) schema.push_back({"dp", "Pa", ColumnRole::Aux, true});
  }
  Rng rng = make_rng(seed, "prediction");
  std::uniform_real_distribution<double> uq(q_range.lo, q_range.hi);
  Matrix data(m, schema.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double q = uq(rng);
    const auto d = segment_drops(q, params, model);
    data(i, 0) = q;
    if (layout == TargetLayout::Total) {
      data(i, 1) = model == LossModel::HazenWilliams ? hydraulics::total_pressure_drop(q, params) : d.total();
    } else {
      data(i, 1) = d.dp1;
      data(i, 2) = d.dpe;
      data(i, 3) = d.dp2;
      if (layout == TargetLayout::SegmentsWithTotal) data(i, 4) = d.total();
    }
  }
  Provenance prov{{"generator", "prediction"},
                  {"seed", std::to_string(seed)},
                  {"M", std::to_string(m)},
                  {"q_min", detail::fmt(q_range.lo)},
                  {"q_max", detail::fmt(q_range.hi)},
                  {"targets", to_string(layout)},
                  {"model", to_string(model)}};
  detail::append_pipe(prov, params);
  return Dataset(std::move(schema), std::move(data), std::move(prov));
}

/// Total drop along two segments of lengths l1, l2 (which replace delta1, delta2).
inline double geometry_pressure_drop(double q, double l1, double l2, const hydraulics::PipeParams& p) {
  using namespace hydraulics;
  const double w1 = p.gamma() * hazen_williams_slope(q, p.kappa1, hydraulic_diameter(p.sigma1), p);
  const double w2 = p.gamma() * hazen_williams_slope(q, p.kappa2, hydraulic_diameter(p.sigma2), p);
  return w1 * l1 + 0.5 * p.rho * q * q * expansion_bracket(p) + w2 * l2;
}

/// (q, l1, l2) -> dp with l1, l2 uniform in `length_range`.
inline Dataset generate_geometry_dataset(std::size_t m, Range q_range, Range length_range,
                                         const hydraulics::PipeParams& params, std::uint64_t seed) {
  detail::check_rows(m);
  q_range.validate("flow");
  length_range.validate("length");
  if (!(q_range.lo > 0.0)) throw ConfigurationError("flow range must be positive");
  if (length_range.lo < 0.0) throw ConfigurationError("lengths must be non-negative");
  params.validate();
  std::vector<Column> schema{{"q", "m^3/s", ColumnRole::Input, true},
                             {"l1", "m", ColumnRole::Input, true},
                             {"l2", "m", ColumnRole::Input, true},
                             {"dp", "Pa", ColumnRole::Target, true}};
  Rng rng = make_rng(seed, "geometry");
  std::uniform_real_distribution<double> uq(q_range.lo, q_range.hi);
  std::uniform_real_distribution<double> ul(length_range.lo, length_range.hi);
  Matrix data(m, 4);
  for (std::size_t i = 0; i < m; ++i) {
    const double q = uq(rng);
    const double l1 = ul(rng);
    const double l2 = ul(rng);
    data(i, 0) = q;
    data(i, 1) = l1;
    data(i, 2) = l2;
    data(i, 3) = geometry_pressure_drop(q, l1, l2, params);
  }
  Provenance prov{{"generator", "geometry"},
                  {"seed", std::to_string(seed)},
                  {"M", std::to_string(m)},
                  {"q_min", detail::fmt(q_range.lo)},
                  {"q_max", detail::fmt(q_range.hi)},
                  {"l_min", detail::fmt(length_range.lo)},
                  {"l_max", detail::fmt(length_range.hi)}};
  detail::append_pipe(prov, params);
  return Dataset(std::move(schema), std::move(data), std::move(prov));
}

/// Regular n_q x n_l x n_l evaluation grid (end points included).
inline Dataset geometry_grid(std::size_t n_q, std::size_t n_l, Range q_range, Range length_range,
                             const hydraulics::PipeParams& params) {
  if (n_q < 2 || n_l < 2) throw ConfigurationError("grid needs at least two points per axis");
  std::vector<Column> schema{{"q", "m^3/s", ColumnRole::Input, true},
                             {"l1", "m", ColumnRole::Input, true},
                             {"l2", "m", ColumnRole::Input, true},
                             {"dp", "Pa", ColumnRole::Target, true}};
  Matrix data(n_q * n_l * n_l, 4);
  auto at = [](Range r, std::size_t i, std::size_t n) {
    return r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  std::size_t row = 0;
  for (std::size_t a = 0; a < n_q; ++a)
    for (std::size_t b = 0; b < n_l; ++b)
      for (std::size_t c = 0; c < n_l; ++c, ++row) {
        const double q = at(q_range, a, n_q), l1 = at(length_range, b, n_l), l2 = at(length_range, c, n_l);
        data(row, 0) = q;
        data(row, 1) = l1;
        data(row, 2) = l2;
        data(row, 3) = geometry_pressure_drop(q, l1, l2, params);
      }
  Provenance prov{{"generator", "geometry_grid"},
                  {"n_q", std::to_string(n_q)},
                  {"n_l", std::to_string(n_l)},
                  {"q_min", detail::fmt(q_range.lo)},
                  {"q_max", detail::fmt(q_range.hi)},
                  {"l_min", detail::fmt(length_range.lo)},
                  {"l_max", detail::fmt(length_range.hi)}};
  detail::append_pipe(prov, params);
  return Dataset(std::move(schema), std::move(data), std::move(prov));
}

/// Straight pipe used for roughness characterization.
inline hydraulics::PipeParams characterization_params() {
  hydraulics::PipeParams p;
  p.sigma1 = 1.0;
  p.sigma2 = 1.0;
  p.xi = 0.0;
  return p;
}

/// (q, p0, p1, p2) -> (kappa1, kappa2); kappas uniform per record, outlet
/// pressure p2 uniform in `outlet_range`.
inline Dataset generate_characterization_dataset(std::size_t m, Range q_range, Range kappa_range,
                                                 const hydraulics::PipeParams& params, std::uint64_t seed,
                                                 Range outlet_range = {0.0, 5.0}) {
  detail::check_rows(m);
  q_range.validate("flow");
  kappa_range.validate("roughness");
  outlet_range.validate("outlet pressure");
  if (!(q_range.lo > 0.0)) throw ConfigurationError("flow range must be positive");
  if (!(kappa_range.lo > 0.0)) throw ConfigurationError("roughness range must be positive");
  params.validate();
  std::vector<Column> schema{{"q", "m^3/s", ColumnRole::Input, true},   {"p0", "Pa", ColumnRole::Input, true},
                             {"p1", "Pa", ColumnRole::Input, true},     {"p2", "Pa", ColumnRole::Input, true},
                             {"kappa1", "1", ColumnRole::Target, false}, {"kappa2", "1", ColumnRole::Target, false}};
  Rng rng = make_rng(seed, "characterization");
  std::uniform_real_distribution<double> uq(q_range.lo, q_range.hi);
  std::uniform_real_distribution<double> uk(kappa_range.lo, kappa_range.hi);
  std::uniform_real_distribution<double> up(outlet_range.lo, outlet_range.hi);
  Matrix data(m, 6);
  for (std::size_t i = 0; i < m; ++i) {
    hydraulics::PipeParams p = params;
    const double q = uq(rng);
    p.kappa1 = uk(rng);
    p.kappa2 = uk(rng);
    const double p2 = up(rng);
    const auto d = hydraulics::segment_pressure_drops(q, p);
    const double p1 = p2 + d.dp2;
    const double p0 = p1 + d.dpe + d.dp1;
    data(i, 0) = q;
    data(i, 1) = p0;
    data(i, 2) = p1;
    data(i, 3) = p2;
    data(i, 4) = p.kappa1;
    data(i, 5) = p.kappa2;
  }
  Provenance prov{{"generator", "characterization"},
                  {"seed", std::to_string(seed)},
                  {"M", std::to_string(m)},
                  {"q_min", detail::fmt(q_range.lo)},
                  {"q_max", detail::fmt(q_range.hi)},
                  {"kappa_min", detail::fmt(kappa_range.lo)},
                  {"kappa_max", detail::fmt(kappa_range.hi)},
                  {"p_out_min", detail::fmt(outlet_range.lo)},
                  {"p_out_max", detail::fmt(outlet_range.hi)}};
  detail::append_pipe(prov, params);
  return Dataset(std::move(schema), std::move(data), std::move(prov));
}

// ---------------------------------------------------------------------------
// Perturbations

/// Adds independent N(0, sigma) noise to every measured column.
inline Dataset add_noise(const Dataset& ds, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigurationError("noise sigma must be non-negative");
  Dataset out = ds;
  if (sigma > 0.0) {
    Rng rng = make_rng(seed, "noise");
    std::normal_distribution<double> z(0.0, sigma);
    auto& data = out.mutable_data();
    for (std::size_t i = 0; i < data.rows(); ++i)
      for (std::size_t j = 0; j < data.cols(); ++j)
        if (ds.schema()[j].measured) data(i, j) += z(rng);
  }
  out.mutable_provenance().emplace_back("transform", "noise " + detail::fmt(sigma) + " " + std::to_string(seed));
  return out;
}

/// Adds the constant `b` to every measured column.
inline Dataset add_bias(const Dataset& ds, double b) {
  Dataset out = ds;
  auto& data = out.mutable_data();
  for (std::size_t i = 0; i < data.rows(); ++i)
    for (std::size_t j = 0; j < data.cols(); ++j)
      if (ds.schema()[j].measured) data(i, j) += b;
  out.mutable_provenance().emplace_back("transform", "bias " + detail::fmt(b));
  return out;
}

/// Per-column min/max recorded by normalize_minmax.
struct Scaling {
  std::vector<std::string> names;
  std::vector<double> min;
  std::vector<double> max;

  std::size_t index(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return j;
    throw SchemaError("scaling record has no column '" + name + "'");
  }
  double range(std::size_t j) const { return max[j] - min[j]; }
  double normalize(std::size_t j, double x) const { return (x - min[j]) / range(j); }
  double denormalize(std::size_t j, double x) const { return min[j] + x * range(j); }
};

/// Maps every column to [0, 1] with (x - min) / (max - min).
inline std::pair<Dataset, Scaling> normalize_minmax(const Dataset& ds) {
  Scaling s;
  const Matrix& d = ds.data();
  if (d.rows() == 0) throw ContractError("cannot normalize an empty data set");
  for (std::size_t j = 0; j < d.cols(); ++j) {
    double lo = d(0, j), hi = d(0, j);
    for (std::size_t i = 1; i < d.rows(); ++i) {
      lo = std::min(lo, d(i, j));
      hi = std::max(hi, d(i, j));
    }
    if (!(hi > lo)) {
      throw DegenerateScaleError("column '" + ds.schema()[j].name + "' is constant and cannot be min-max scaled");
    }
    s.names.push_back(ds.schema()[j].name);
    s.min.push_back(lo);
    s.max.push_back(hi);
  }
  Dataset out = ds;
  auto& data = out.mutable_data();
  for (std::size_t i = 0; i < data.rows(); ++i)
    for (std::size_t j = 0; j < data.cols(); ++j) data(i, j) = s.normalize(j, data(i, j));
  out.mutable_provenance().emplace_back("transform", "normalize");
  return {std::move(out), std::move(s)};
}

/// Applies an existing scaling record (e.g. the training set's) to another data set.
inline Dataset apply_scaling(const Dataset& ds, const Scaling& s) {
  Dataset out = ds;
  auto& data = out.mutable_data();
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const std::size_t k = s.index(ds.schema()[j].name);
    for (std::size_t i = 0; i < data.rows(); ++i) data(i, j) = s.normalize(k, data(i, j));
  }
  out.mutable_provenance().emplace_back("transform", "normalize");
  return out;
}

inline Dataset denormalize(const Dataset& ds, const Scaling& s) {
  Dataset out = ds;
  auto& data = out.mutable_data();
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const std::size_t k = s.index(ds.schema()[j].name);
    for (std::size_t i = 0; i < data.rows(); ++i) data(i, j) = s.denormalize(k, data(i, j));
  }
  auto& prov = out.mutable_provenance();
  if (!prov.empty() && prov.back() == std::pair<std::string, std::string>{"transform", "normalize"}) prov.pop_back();
  return out;
}

// ---------------------------------------------------------------------------
// Regeneration from provenance

namespace detail {

inline const std::string& prov_at(const Provenance& p, const std::string& key) {
  for (const auto& [k, v] : p)
    if (k == key) return v;
  throw SchemaError("provenance lacks '" + key + "'");
}

inline double prov_double(const Provenance& p, const std::string& key) {
  auto v = text::parse_double(prov_at(p, key));
  if (!v) throw SchemaError("provenance value for '" + key + "' is not a number");
  return *v;
}

inline hydraulics::PipeParams prov_pipe(const Provenance& p) {
  hydraulics::PipeParams pp;
  pp.sigma1 = prov_double(p, "pipe.sigma1");
  pp.sigma2 = prov_double(p, "pipe.sigma2");
  pp.kappa1 = prov_double(p, "pipe.kappa1");
  pp.kappa2 = prov_double(p, "pipe.kappa2");
  pp.delta1 = prov_double(p, "pipe.delta1");
  pp.delta2 = prov_double(p, "pipe.delta2");
  pp.rho = prov_double(p, "pipe.rho");
  pp.g = prov_double(p, "pipe.g");
  pp.xi = prov_double(p, "pipe.xi");
  pp.hw_lambda = prov_double(p, "pipe.hw_lambda");
  pp.hw_alpha = prov_double(p, "pipe.hw_alpha");
  pp.hw_beta = prov_double(p, "pipe.hw_beta");
  pp.nu = prov_double(p, "pipe.nu");
  return pp;
}

}  // namespace detail

/// Rebuilds a data set from its provenance block alone.
inline Dataset regenerate(const Provenance& p) {
  using detail::prov_at;
  using detail::prov_double;
  const std::string& gen = prov_at(p, "generator");
  const auto pipe = detail::prov_pipe(p);
  Dataset ds;
  if (gen == "prediction") {
    ds = generate_prediction_dataset(std::stoull(prov_at(p, "M")), {prov_double(p, "q_min"), prov_double(p, "q_max")},
                                     pipe, std::stoull(prov_at(p, "seed")),
                                     target_layout_from_string(prov_at(p, "targets")),
                                     loss_model_from_string(prov_at(p, "model")));
  } else if (gen == "geometry") {
    ds = generate_geometry_dataset(std::stoull(prov_at(p, "M")), {prov_double(p, "q_min"), prov_double(p, "q_max")},
                                   {prov_double(p, "l_min"), prov_double(p, "l_max")}, pipe,
                                   std::stoull(prov_at(p, "seed")));
  } else if (gen == "geometry_grid") {
    ds = geometry_grid(std::stoull(prov_at(p, "n_q")), std::stoull(prov_at(p, "n_l")),
                       {prov_double(p, "q_min"), prov_double(p, "q_max")},
                       {prov_double(p, "l_min"), prov_double(p, "l_max")}, pipe);
  } else if (gen == "characterization") {
    ds = generate_characterization_dataset(
        std::stoull(prov_at(p, "M")), {prov_double(p, "q_min"), prov_double(p, "q_max")},
        {prov_double(p, "kappa_min"), prov_double(p, "kappa_max")}, pipe, std::stoull(prov_at(p, "seed")),
        {prov_double(p, "p_out_min"), prov_double(p, "p_out_max")});
  } else {
    throw SchemaError("unknown generator '" + gen + "' in provenance");
  }
  for (const auto& [k, v] : p) {
    if (k != "transform") continue;
    const auto parts = text::split(v, ' ');
    if (parts[0] == "noise" && parts.size() == 3) {
      ds = add_noise(ds, *text::parse_double(parts[1]), std::stoull(parts[2]));
    } else if (parts[0] == "bias" && parts.size() == 2) {
      ds = add_bias(ds, *text::parse_double(parts[1]));
    } else if (parts[0] == "normalize") {
      ds = normalize_minmax(ds).first;
    } else {
      throw SchemaError("unknown transform '" + v + "' in provenance");
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence

inline void write_dataset(std::ostream& os, const Dataset& ds) {
  os << "#pgnniv-dataset 1\n";
  for (const auto& [k, v] : ds.provenance()) os << "#provenance " << k << ' ' << v << '\n';
  for (const auto& c : ds.schema()) {
    os << "#column " << c.name << ' ' << c.unit << ' ' << to_string(c.role) << ' '
       << (c.measured ? "measured" : "latent") << '\n';
  }
  std::vector<std::string> names;
  for (const auto& c : ds.schema()) names.push_back(c.name);
  os << text::join(names, ",") << '\n';
  const Matrix& d = ds.data();
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) {
      if (j) os << ',';
      os << text::format_double(d(i, j));
    }
    os << '\n';
  }
}

inline void save(const Dataset& ds, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_dataset(os, ds);
}

inline Dataset read_dataset(std::istream& is, const std::vector<std::string>& required = {}) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line) || text::trim(line) != "#pgnniv-dataset 1") {
    throw ParseError("missing '#pgnniv-dataset 1' header", 1);
  }
  ++lineno;
  Provenance prov;
  std::vector<Column> declared;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++lineno;
    line = text::trim(line);
    if (line.empty()) continue;
    if (line.rfind("#provenance ", 0) == 0) {
      const std::string rest = line.substr(12);
      const auto sp = rest.find(' ');
      if (sp == std::string::npos) throw ParseError("malformed provenance line", lineno);
      prov.emplace_back(rest.substr(0, sp), rest.substr(sp + 1));
    } else if (line.rfind("#column ", 0) == 0) {
      const auto parts = text::split(line.substr(8), ' ');
      if (parts.size() != 4) throw ParseError("malformed column declaration", lineno);
      Column c{parts[0], parts[1], ColumnRole::Input, parts[3] == "measured"};
      if (parts[2] == "input") c.role = ColumnRole::Input;
      else if (parts[2] == "target") c.role = ColumnRole::Target;
      else if (parts[2] == "aux") c.role = ColumnRole::Aux;
      else throw ParseError("unknown column role '" + parts[2] + "'", lineno);
      if (parts[3] != "measured" && parts[3] != "latent") throw ParseError("unknown column kind '" + parts[3] + "'", lineno);
      declared.push_back(std::move(c));
    } else if (line.front() == '#') {
      continue;
    } else {
      header = text::split(line, ',');
      break;
    }
  }
  if (header.empty()) throw ParseError("missing column header row", lineno);
  for (auto& h : header) h = text::trim(h);
  for (const auto& c : declared) {
    if (std::find(header.begin(), header.end(), c.name) == header.end()) {
      throw SchemaError("declared column '" + c.name + "' is missing from the header row");
    }
  }
  std::vector<Column> schema;
  for (const auto& h : header) {
    auto it = std::find_if(declared.begin(), declared.end(), [&](const Column& c) { return c.name == h; });
    if (it == declared.end()) throw SchemaError("column '" + h + "' has no declaration");
    schema.push_back(*it);
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != schema.size()) {
      throw ParseError("expected " + std::to_string(schema.size()) + " values, found " + std::to_string(cells.size()),
                       lineno);
    }
    for (const auto& cell : cells) {
      auto v = text::parse_double(cell);
      if (!v) throw ParseError("not a number: '" + cell + "'", lineno);
      values.push_back(*v);
    }
    ++rows;
  }
  Matrix data(rows, schema.size());
  std::copy(values.begin(), values.end(), data.values().begin());
  Dataset ds(std::move(schema), std::move(data), std::move(prov));
  ds.require_columns(required);
  return ds;
}

inline Dataset load(const std::filesystem::path& path, const std::vector<std::string>& required = {}) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_dataset(is, required);
}

}  // namespace pgnniv
