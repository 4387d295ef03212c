#pragma once

// Versioned network checkpoints: the spec and constraint registry echoed in
// config form, followed by every Param matrix at 17 significant digits.
// Loading reproduces forward outputs bit for bit.

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pgnniv/config.hpp"
#include "pgnniv/errors.hpp"
#include "pgnniv/network.hpp"
#include "pgnniv/text.hpp"

namespace pgnniv {

inline constexpr int kCheckpointVersion = 1;

/// `meta` carries free-form run information (experiment, variant, seed, ...).
inline config::Tree checkpoint_tree(const Network& net, const std::map<std::string, std::string>& meta = {}) {
  config::Tree t;
  t.put("checkpoint.version", kCheckpointVersion);
  for (const auto& [k, v] : meta) t.put(boost::property_tree::path("meta/" + k, '/'), v);
  config::put_network(t, net.spec());
  for (const auto& c : net.constraints()) {
    if (!c.spec) throw ContractError("constraint '" + c.id + "' has no declarative form and cannot be saved");
    config::put_constraint(t, *c.spec);
  }
  for (const auto& p : net.params()) {
    config::Tree s;
    s.put("shape", std::to_string(p.shape().rows) + "x" + std::to_string(p.shape().cols));
    s.put("values", text::format_list(std::vector<double>(p.value().values().begin(), p.value().values().end())));
    t.put_child(boost::property_tree::path("param:" + p.id(), '/'), s);
  }
  return t;
}

inline void save_checkpoint(const Network& net, const std::filesystem::path& path,
                            const std::map<std::string, std::string>& meta = {}) {
  config::write_file(checkpoint_tree(net, meta), path);
}

inline Network network_from_checkpoint(const config::Tree& t) {
  const int version = t.get<int>("checkpoint.version", 0);
  if (version != kCheckpointVersion) {
    throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  }
  Network net = build_network(config::get_network(t), 0);
  for (const auto& c : config::get_constraints(t)) register_constraint(net, make_constraint(c));
  for (auto& p : net.params()) {
    auto it = t.find("param:" + p.id());
    if (it == t.not_found()) throw SchemaError("checkpoint lacks parameter '" + p.id() + "'");
    const std::string shape = config::get_string(it->second, "shape", "param:" + p.id());
    if (shape != std::to_string(p.shape().rows) + "x" + std::to_string(p.shape().cols)) {
      throw ShapeError("checkpoint parameter '" + p.id() + "' has shape " + shape + ", network expects " +
                       to_string(p.shape()));
    }
    const auto values = config::parse_list(config::get_string(it->second, "values", "param:" + p.id()), p.id());
    if (values.size() != p.value().size()) throw SchemaError("checkpoint parameter '" + p.id() + "' is truncated");
    Matrix m(p.shape().rows, p.shape().cols);
    std::copy(values.begin(), values.end(), m.values().begin());
    p.set_value(m);
  }
  return net;
}

inline Network load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("no checkpoint at " + path.string());
  return network_from_checkpoint(config::read_file(path));
}

inline std::map<std::string, std::string> checkpoint_meta(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  const auto t = config::read_file(path);
  if (auto it = t.find("meta"); it != t.not_found()) {
    for (const auto& [k, v] : it->second) out[k] = v.data();
  }
  return out;
}

}  // namespace pgnniv
