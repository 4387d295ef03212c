#pragma once

// On-disk form of an experiment report:
//
//   manifest                       config echo, seeds, artifact checksums
//   traces/<variant>_s<seed>.csv   iteration,mse,pen,of
//   evals/<variant>_s<seed>.csv    metric,value
//   checkpoints/<variant>_s<seed>.ckpt
//   tables/*.csv                   aggregates, rebuilt from traces and evals
//   curves/*.csv                   smoothed RMSE / PEN per seed, plot-ready
//
// All paths are relative to the report directory.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "pgnniv/checkpoint.hpp"
#include "pgnniv/config.hpp"
#include "pgnniv/errors.hpp"
#include "pgnniv/experiments.hpp"
#include "pgnniv/metrics.hpp"
#include "pgnniv/text.hpp"

namespace pgnniv {

namespace fs = std::filesystem;

inline std::string run_stem(const std::string& variant, std::uint64_t seed) {
  return variant + "_s" + std::to_string(seed);
}

// --- traces and evals ---------------------------------------------------------

inline void write_trace(std::ostream& os, const TrainingTrace& t) {
  os << "iteration,mse,pen,of\n";
  for (const auto& r : t.records) {
    os << r.iteration << ',' << text::format_double(r.mse) << ',' << text::format_double(r.pen) << ','
       << text::format_double(r.of) << '\n';
  }
}

inline TrainingTrace read_trace(std::istream& is) {
  TrainingTrace t;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line) || text::trim(line) != "iteration,mse,pen,of") {
    throw ParseError("trace file lacks the iteration,mse,pen,of header", 1);
  }
  ++lineno;
  while (std::getline(is, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 4) throw ParseError("trace row needs 4 fields", lineno);
    TraceRecord r;
    try {
      r.iteration = config::parse_count(text::trim(f[0]), "iteration");
    } catch (const ConfigurationError&) {
      throw ParseError("bad iteration '" + f[0] + "'", lineno);
    }
    double* dst[] = {&r.mse, &r.pen, &r.of};
    for (int k = 0; k < 3; ++k) {
      auto v = text::parse_double(f[k + 1]);
      if (!v) throw ParseError("bad number '" + f[k + 1] + "'", lineno);
      *dst[k] = *v;
    }
    t.records.push_back(r);
  }
  return t;
}

inline void write_metrics(std::ostream& os, const Metrics& m) {
  os << "metric,value\n";
  for (const auto& [k, v] : m) os << k << ',' << text::format_double(v) << '\n';
}

inline Metrics read_metrics(std::istream& is) {
  Metrics m;
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || text::trim(line) != "metric,value") throw ParseError("eval file lacks its header", 1);
  while (std::getline(is, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 2) throw ParseError("eval row needs 2 fields", lineno);
    auto v = text::parse_double(f[1]);
    if (!v) throw ParseError("bad number '" + f[1] + "'", lineno);
    m[text::trim(f[0])] = *v;
  }
  return m;
}

// --- manifest -----------------------------------------------------------------

inline std::string file_checksum(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  boost::crc_32_type crc;
  char buf[1 << 15];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) crc.process_bytes(buf, static_cast<std::size_t>(is.gcount()));
  std::ostringstream os;
  os << "crc32:" << std::hex << std::setw(8) << std::setfill('0') << crc.checksum();
  return os.str();
}

namespace detail {

inline std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> s;
  for (auto x : seeds) s.push_back(std::to_string(x));
  return text::join(s, ",");
}

inline std::string format_range(Range r) { return text::format_double(r.lo) + "," + text::format_double(r.hi); }

inline Range parse_range(const std::string& s, const std::string& what) {
  const auto xs = config::parse_list(s, what);
  if (xs.size() != 2) throw ConfigurationError(what + " needs two entries");
  return {xs[0], xs[1]};
}

inline boost::property_tree::path key(const std::string& k) { return boost::property_tree::path(k, '|'); }

}  // namespace detail

/// Full config echo. Each variant's single-run config is stored under
/// sections prefixed with "@<variant>/".
inline config::Tree experiment_tree(const ExperimentConfig& c) {
  config::Tree t;
  config::Tree e;
  e.put("id", c.id);
  e.put("title", c.title);
  e.put("kind", to_string(c.kind));
  e.put("seeds", detail::join_seeds(c.seeds));
  std::vector<std::string> names;
  for (const auto& v : c.variants) names.push_back(v.name);
  e.put("variants", text::join(names, ","));
  t.put_child("experiment", e);
  config::Tree p;
  p.put("test_size", c.eval.test_size);
  p.put("test_q", detail::format_range(c.eval.test_q));
  if (c.eval.l2_interval) p.put("l2_interval", detail::format_range(*c.eval.l2_interval));
  p.put("l2_nodes", c.eval.l2_nodes);
  if (c.eval.extrapolate) p.put("extrapolate", detail::format_range(*c.eval.extrapolate));
  p.put("grid_q", c.eval.grid_q);
  p.put("grid_l", c.eval.grid_l);
  p.put("kappa_interior", detail::format_range(c.eval.kappa_interior));
  p.put("window", c.eval.window);
  p.put("compare_at", c.eval.compare_at);
  t.put_child("eval", p);
  for (const auto& v : c.variants) {
    for (const auto& [section, body] : variant_tree(v)) t.put_child(detail::key("@" + v.name + "/" + section), body);
  }
  return t;
}

inline ExperimentConfig experiment_from_tree(const config::Tree& t) {
  ExperimentConfig c;
  const auto& e = config::section(t, "experiment");
  c.id = config::get_string(e, "id", "experiment");
  c.title = e.get<std::string>("title", "");
  c.kind = experiment_kind_from_string(config::get_string(e, "kind", "experiment"));
  c.seeds = parse_seeds(e.get<std::string>("seeds", ""), "[experiment] seeds");
  if (auto it = t.find("eval"); it != t.not_found()) {
    const auto& p = it->second;
    c.eval.test_size = config::get_count(p, "test_size", std::uint64_t{c.eval.test_size});
    if (auto s = p.get_optional<std::string>("test_q")) c.eval.test_q = detail::parse_range(*s, "[eval] test_q");
    if (auto s = p.get_optional<std::string>("l2_interval")) c.eval.l2_interval = detail::parse_range(*s, "[eval] l2_interval");
    c.eval.l2_nodes = config::get_count(p, "l2_nodes", std::uint64_t{c.eval.l2_nodes});
    if (auto s = p.get_optional<std::string>("extrapolate")) c.eval.extrapolate = detail::parse_range(*s, "[eval] extrapolate");
    c.eval.grid_q = config::get_count(p, "grid_q", std::uint64_t{c.eval.grid_q});
    c.eval.grid_l = config::get_count(p, "grid_l", std::uint64_t{c.eval.grid_l});
    if (auto s = p.get_optional<std::string>("kappa_interior")) {
      c.eval.kappa_interior = detail::parse_range(*s, "[eval] kappa_interior");
    }
    c.eval.window = config::get_count(p, "window", std::uint64_t{c.eval.window});
    c.eval.compare_at = config::get_count(p, "compare_at", std::uint64_t{c.eval.compare_at});
  }
  for (const auto& name : text::split(config::get_string(e, "variants", "experiment"), ',')) {
    const std::string prefix = "@" + text::trim(name) + "/";
    config::Tree vt;
    for (const auto& [section, body] : t) {
      if (section.rfind(prefix, 0) == 0) vt.put_child(detail::key(section.substr(prefix.size())), body);
    }
    if (vt.empty()) throw SchemaError("manifest lacks the sections of variant '" + name + "'");
    c.variants.push_back(variant_from_tree(vt));
  }
  c.validate();
  return c;
}

// --- tables -------------------------------------------------------------------

namespace detail {

/// 1-based index of the last record at or before `iteration`.
inline std::size_t record_index(const TrainingTrace& t, std::size_t iteration) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < t.records.size() && t.records[i].iteration <= iteration; ++i) idx = i + 1;
  return std::max<std::size_t>(idx, 1);
}

inline void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
}

}  // namespace detail

struct TwinComparison {
  std::string constrained;
  std::string twin;
  std::size_t at_iteration = 0;
  RunComparison result;
};

/// Seed-paired comparison of every (constrained, twin) pair.
inline std::vector<TwinComparison> twin_comparisons(const Report& r) {
  std::vector<TwinComparison> out;
  for (const auto& v : r.config.variants) {
    if (v.twin_of.empty()) continue;
    std::vector<SeedRun> a, b;
    for (auto seed : r.config.seeds_for(v)) {
      const auto& ra = r.run(v.twin_of, seed);
      const auto& rb = r.run(v.name, seed);
      a.push_back({seed, ra.trace, ra.diverged});
      b.push_back({seed, rb.trace, rb.diverged});
    }
    std::size_t at = 1;
    for (const auto& s : a)
      if (!s.diverged) at = detail::record_index(s.trace, r.config.eval.compare_at);
    const std::size_t window = std::max<std::size_t>(1, r.config.eval.window / std::max<std::size_t>(1, v.trace_stride));
    out.push_back({v.twin_of, v.name, at, compare_runs(a, b, at, window)});
  }
  return out;
}

/// Tables and curves derived from traces and evals only.
inline std::map<std::string, std::string> render_tables(const Report& r) {
  std::map<std::string, std::string> files;
  const auto f = [](double v) { return text::format_double(v); };

  std::ostringstream runs;
  runs << "variant,seed,diverged,records,final_rmse,final_rmse_smoothed,final_pen\n";
  for (const auto& run : r.runs) {
    const auto get = [&](const char* k) {
      auto it = run.metrics.find(k);
      return it == run.metrics.end() ? std::string() : f(it->second);
    };
    runs << run.variant << ',' << run.seed << ',' << (run.diverged ? 1 : 0) << ',' << run.trace.size() << ','
         << get("final_rmse") << ',' << get("final_rmse_smoothed") << ',' << get("final_pen") << '\n';
  }
  files["tables/runs.csv"] = runs.str();

  std::ostringstream summary;
  summary << "variant,metric,count,mean,min,max\n";
  for (const auto& v : r.config.variants) {
    std::map<std::string, std::vector<double>> by_metric;
    for (const auto* run : r.runs_of(v.name))
      for (const auto& [k, val] : run->metrics) by_metric[k].push_back(val);
    for (const auto& [k, vals] : by_metric) {
      summary << v.name << ',' << k << ',' << vals.size() << ',' << f(mean_of(vals)) << ','
              << f(*std::min_element(vals.begin(), vals.end())) << ','
              << f(*std::max_element(vals.begin(), vals.end())) << '\n';
    }
  }
  files["tables/summary.csv"] = summary.str();

  std::ostringstream cmp;
  cmp << "constrained,twin,at_record,seeds_compared,wins_constrained,wins_twin,ties,ordering_fraction,auc_ratio,"
         "excluded_seeds\n";
  for (const auto& c : twin_comparisons(r)) {
    std::vector<std::string> ex;
    for (auto s : c.result.excluded_seeds) ex.push_back(std::to_string(s));
    cmp << c.constrained << ',' << c.twin << ',' << c.at_iteration << ',' << c.result.seeds_compared << ','
        << c.result.wins_a << ',' << c.result.wins_b << ',' << c.result.ties << ',' << f(c.result.ordering_fraction)
        << ',' << f(c.result.auc_ratio) << ',' << text::join(ex, " ") << '\n';
  }
  files["tables/comparison.csv"] = cmp.str();

  for (const auto& v : r.config.variants) {
    const auto runs_v = r.runs_of(v.name);
    std::size_t len = 0;
    for (const auto* run : runs_v) len = std::max(len, run->trace.size());
    const std::size_t window = std::max<std::size_t>(1, r.config.eval.window / v.trace_stride);
    for (const char* what : {"rmse", "pen"}) {
      std::vector<std::vector<double>> cols;
      const TrainingTrace* longest = nullptr;
      for (const auto* run : runs_v) {
        const bool rmse = std::string(what) == "rmse";
        cols.push_back(moving_average(rmse ? rmse_curve(run->trace) : pen_curve(run->trace), window));
        if (run->trace.size() == len) longest = &run->trace;
      }
      std::ostringstream os;
      os << "iteration";
      for (const auto* run : runs_v) os << ",seed" << run->seed;
      os << '\n';
      for (std::size_t i = 0; i < len; ++i) {
        os << longest->records[i].iteration;
        for (const auto& c : cols) os << ',' << (i < c.size() ? f(c[i]) : std::string());
        os << '\n';
      }
      files["curves/" + v.name + "_" + what + ".csv"] = os.str();
    }
  }
  return files;
}

inline std::vector<std::string> write_tables(const Report& r, const fs::path& dir) {
  std::vector<std::string> written;
  for (const auto& [rel, body] : render_tables(r)) {
    detail::write_text(dir / rel, body);
    written.push_back(rel);
  }
  return written;
}

// --- whole reports ------------------------------------------------------------

/// Writes traces, evals, checkpoints (for runs that kept their network),
/// tables, curves and finally the manifest with checksums of all of them.
inline void write_report(const Report& r, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::string> artifacts;
  for (const auto& run : r.runs) {
    const std::string stem = run_stem(run.variant, run.seed);
    std::ostringstream tr, ev;
    write_trace(tr, run.trace);
    write_metrics(ev, run.metrics);
    detail::write_text(dir / "traces" / (stem + ".csv"), tr.str());
    detail::write_text(dir / "evals" / (stem + ".csv"), ev.str());
    artifacts.push_back("traces/" + stem + ".csv");
    artifacts.push_back("evals/" + stem + ".csv");
    if (run.network) {
      const Variant& v = r.config.variant(run.variant);
      config::Tree ck = checkpoint_tree(*run.network, {{"experiment", r.config.id},
                                                       {"variant", run.variant},
                                                       {"seed", std::to_string(run.seed)}});
      config::put_data(ck, v.data);
      config::put_hyper(ck, v.hyper);
      const std::string rel = "checkpoints/" + stem + ".ckpt";
      config::write_file(ck, dir / rel);
      artifacts.push_back(rel);
    }
  }
  for (auto& rel : write_tables(r, dir)) artifacts.push_back(rel);
  config::Tree m = experiment_tree(r.config);
  config::Tree a;
  for (const auto& rel : artifacts) a.put(detail::key(rel), file_checksum(dir / rel));
  m.put_child("artifacts", a);
  config::write_file(m, dir / "manifest");
}

/// Reads the manifest, traces and evals back (networks are not loaded).
inline Report load_report(const fs::path& dir) {
  const fs::path manifest = dir / "manifest";
  if (!fs::exists(manifest)) throw std::runtime_error("no manifest in " + dir.string());
  Report r{experiment_from_tree(config::read_file(manifest)), {}};
  for (const auto& v : r.config.variants) {
    for (auto seed : r.config.seeds_for(v)) {
      const std::string stem = run_stem(v.name, seed);
      std::ifstream tr(dir / "traces" / (stem + ".csv")), ev(dir / "evals" / (stem + ".csv"));
      if (!tr || !ev) throw std::runtime_error("report " + dir.string() + " lacks the files of run " + stem);
      RunResult run;
      run.variant = v.name;
      run.seed = seed;
      run.trace = read_trace(tr);
      run.metrics = read_metrics(ev);
      run.diverged = run.metrics.count("diverged") && run.metrics.at("diverged") != 0.0;
      r.runs.push_back(std::move(run));
    }
  }
  return r;
}

/// Regenerates tables/ and curves/ from the persisted traces and evals.
inline std::vector<std::string> rebuild_tables(const fs::path& dir) { return write_tables(load_report(dir), dir); }

}  // namespace pgnniv
