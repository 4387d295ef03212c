// pgnniv: data generation, training, evaluation and report regeneration.
//
// Exit codes: 0 success, 1 failed check or runtime error, 2 usage,
// 3 training divergence, 4 missing artifact.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgnniv/checkpoint.hpp"
#include "pgnniv/checks.hpp"
#include "pgnniv/config.hpp"
#include "pgnniv/dataset.hpp"
#include "pgnniv/experiments.hpp"
#include "pgnniv/report.hpp"
#include "pgnniv/training.hpp"

namespace fs = std::filesystem;
using namespace pgnniv;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;
constexpr int kDiverged = 3;
constexpr int kMissing = 4;

struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Global {
  int verbosity = 1;  // 0 quiet, 1 normal, 2 verbose
  std::string out;    // empty: $PGNNIV_OUT or ./pgnniv-out
};

fs::path output_root(const Global& g) {
  if (!g.out.empty()) return g.out;
  if (const char* env = std::getenv("PGNNIV_OUT"); env && *env) return env;
  return "pgnniv-out";
}

void say(const Global& g, const std::string& s) {
  if (g.verbosity > 0) std::cout << s << '\n';
}

Range parse_range_flag(const std::string& s, const std::string& flag) {
  const auto parts = text::split(s, ':');
  if (parts.size() != 2) throw CLI::ValidationError(flag, "expected lo:hi, got '" + s + "'");
  auto lo = text::parse_double(parts[0]), hi = text::parse_double(parts[1]);
  if (!lo || !hi || !(*hi > *lo)) throw CLI::ValidationError(flag, "expected lo:hi with lo < hi, got '" + s + "'");
  return {*lo, *hi};
}

// --- generate -----------------------------------------------------------------

struct GenerateArgs {
  std::string generator;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::string file;
  double q_min = 1.0, q_max = 5.0, l_min = 0.0, l_max = 10.0, kappa_min = 80.0, kappa_max = 140.0;
  std::string targets = "total", model = "hazen_williams";
  double noise = 0.0, bias = 0.0;
  bool normalize = false;
};

int cmd_generate(const Global& g, const GenerateArgs& a) {
  config::DataConfig d;
  d.generator = a.generator;
  d.m = a.m;
  d.q_range = {a.q_min, a.q_max};
  d.length_range = {a.l_min, a.l_max};
  d.kappa_range = {a.kappa_min, a.kappa_max};
  d.layout = target_layout_from_string(a.targets);
  d.model = loss_model_from_string(a.model);
  d.noise = a.noise;
  d.bias = a.bias;
  d.normalize = a.normalize;
  if (a.generator == "geometry") d.pipe = hydraulics::geometry_params();
  if (a.generator == "characterization") d.pipe = characterization_params();
  const Dataset ds = config::make_dataset(d, a.seed);
  const fs::path path = a.file.empty() ? output_root(g) / (a.generator + "_M" + std::to_string(a.m) + "_s" +
                                                           std::to_string(a.seed) + ".csv")
                                       : fs::path(a.file);
  save(ds, path);
  say(g, "wrote " + std::to_string(ds.rows()) + " records to " + path.string());
  return kOk;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string experiment, variant, config_file, data_file, out;
  std::uint64_t seed = 1;
  std::optional<std::size_t> iterations;
};

struct Resolved {
  Variant variant;
  std::string experiment;  // empty for custom configs
  ExperimentConfig config;
};

ExperimentKind kind_for(const Variant& v) {
  if (v.data.generator == "geometry") return ExperimentKind::Geometry;
  if (v.data.generator == "characterization") return ExperimentKind::Characterization;
  return v.spec.model_based() ? ExperimentKind::Model : ExperimentKind::Prediction;
}

Resolved resolve(const TrainArgs& a) {
  Resolved r;
  if (!a.config_file.empty()) {
    if (!fs::exists(a.config_file)) throw MissingArtifact("no config file at " + a.config_file);
    r.variant = variant_from_tree(config::read_file(a.config_file));
    r.config.id = "custom";
    r.config.kind = kind_for(r.variant);
  } else {
    r.config = builtin_experiment(a.experiment);
    r.experiment = a.experiment;
    r.variant = r.config.variant(a.variant.empty() ? r.config.variants.front().name : a.variant);
  }
  if (a.iterations) r.variant.hyper.iterations = *a.iterations;
  r.variant.seeds = {a.seed};
  r.config.variants = {r.variant};
  r.config.seeds = {a.seed};
  return r;
}

int cmd_train(const Global& g, const TrainArgs& a) {
  if (a.config_file.empty() == a.experiment.empty()) {
    throw CLI::ValidationError("train", "give exactly one of --experiment or --config");
  }
  Resolved r = resolve(a);
  const Variant& v = r.variant;
  Scaling scaling;
  Dataset ds;
  if (!a.data_file.empty()) {
    if (!fs::exists(a.data_file)) throw MissingArtifact("no data set at " + a.data_file);
    ds = load(a.data_file);
    if (v.data.normalize) std::tie(ds, scaling) = normalize_minmax(ds);
  } else {
    ds = variant_dataset(v, a.seed, &scaling);
  }
  const Scaling* sc = v.data.normalize ? &scaling : nullptr;
  Network net = build_variant(v, a.seed, ds, sc);
  const fs::path dir = a.out.empty() ? output_root(g) / "runs" / ((r.experiment.empty() ? "custom" : r.experiment) +
                                                                     "_" + run_stem(v.name, a.seed))
                                     : fs::path(a.out);
  fs::create_directories(dir);
  config::write_file(variant_tree(v), dir / "run.cfg");
  auto write_trace_file = [&](const TrainingTrace& t) {
    std::ofstream os(dir / "trace.csv", std::ios::binary);
    write_trace(os, decimate(t, v.trace_stride));
  };
  const std::size_t every = std::max<std::size_t>(1, v.hyper.iterations / 10);
  IterationHook hook;
  if (g.verbosity > 1) {
    hook = [&](std::size_t it, const Network&) {
      if (it % every == 0) std::cout << "  iteration " << it << '\n';
    };
  }
  try {
    const TrainingTrace t = train(net, ds, v.hyper, a.seed, hook);
    write_trace_file(t);
    say(g, "final RMSE " + text::format_double(std::sqrt(t.records.back().mse), 6) + ", PEN " +
               text::format_double(t.records.back().pen, 6));
  } catch (const TrainingDiverged& e) {
    write_trace_file(e.trace());
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  }
  config::Tree ck = checkpoint_tree(net, {{"experiment", r.experiment},
                                          {"variant", v.name},
                                          {"seed", std::to_string(a.seed)},
                                          {"kind", to_string(r.config.kind)}});
  config::put_data(ck, v.data);
  config::put_hyper(ck, v.hyper);
  config::write_file(ck, dir / "checkpoint.ckpt");
  say(g, "wrote " + (dir / "checkpoint.ckpt").string());
  return kOk;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, report, experiment, extrapolate, out;
  bool probe = false;
  std::size_t probes = 101;
  std::optional<std::uint64_t> seed;
};

/// Variant and plan for a stored network: the original [variant] config when
/// the checkpoint belongs to a run directory or report, else the checkpoint's own echo.
struct EvalTarget {
  ExperimentConfig config;
  Variant variant;
  std::uint64_t seed = 1;
};

EvalTarget eval_target(const config::Tree& ck, const fs::path& ck_path, const EvalArgs& a,
                       const std::optional<ExperimentConfig>& from_report) {
  std::map<std::string, std::string> meta;
  if (auto it = ck.find("meta"); it != ck.not_found())
    for (const auto& [k, v] : it->second) meta[k] = v.data();
  EvalTarget t;
  t.seed = a.seed ? *a.seed : (meta.count("seed") ? config::parse_count(meta["seed"], "seed") : 1);
  const std::string exp = !a.experiment.empty() ? a.experiment : meta["experiment"];
  if (from_report) {
    t.config = *from_report;
    t.variant = t.config.variant(meta.at("variant"));
  } else if (fs::exists(ck_path.parent_path() / "run.cfg")) {
    t.variant = variant_from_tree(config::read_file(ck_path.parent_path() / "run.cfg"));
  } else {
    t.variant = variant_from_tree(ck);
  }
  if (!from_report) {
    bool builtin_plan = false;
    for (const auto& id : builtin_ids()) builtin_plan = builtin_plan || id == exp;
    if (builtin_plan) {
      const auto b = builtin_experiment(exp);
      t.config.eval = b.eval;
      t.config.kind = b.kind;
      t.config.id = b.id;
    } else {
      t.config.id = "custom";
      t.config.kind = kind_for(t.variant);
    }
  }
  if (!a.extrapolate.empty()) t.config.eval.extrapolate = parse_range_flag(a.extrapolate, "--extrapolate");
  return t;
}

Matrix probe_inputs(const EvalTarget& t, const Scaling* sc, std::size_t n) {
  if (t.variant.spec.input_size == 1) {
    const Range r = t.config.eval.extrapolate.value_or(t.config.eval.test_q);
    const auto qs = linspace(r.lo, r.hi, n);
    Matrix x(n, 1);
    for (std::size_t i = 0; i < n; ++i) x(i, 0) = qs[i];
    return x;
  }
  Dataset ds = variant_dataset(t.variant, derive_seed(t.seed, "probe"));
  if (sc) ds = apply_scaling(ds, *sc);
  const Matrix all = ds.inputs();
  Matrix x(std::min(n, all.rows()), all.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) = all(i, j);
  return x;
}

void evaluate_one(const Global& g, const fs::path& ck_path, const EvalArgs& a,
                  const std::optional<ExperimentConfig>& from_report, const fs::path& out_dir) {
  if (!fs::exists(ck_path)) throw MissingArtifact("no checkpoint at " + ck_path.string());
  const config::Tree ck = config::read_file(ck_path);
  const Network net = network_from_checkpoint(ck);
  const EvalTarget t = eval_target(ck, ck_path, a, from_report);
  Scaling scaling;
  const Scaling* sc = nullptr;
  if (t.variant.data.normalize) {
    variant_dataset(t.variant, t.seed, &scaling);
    sc = &scaling;
  }
  const Metrics m = evaluate_network(t.config, t.variant, net, t.seed, sc);
  const std::string stem = ck_path.stem().string();
  fs::create_directories(out_dir);
  {
    std::ofstream os(out_dir / (stem + "_eval.csv"), std::ios::binary);
    write_metrics(os, m);
  }
  say(g, ck_path.string() + ":");
  for (const auto& [k, v] : m) say(g, "  " + k + " = " + text::format_double(v, 8));
  if (a.probe) {
    const StateTable st = export_state_relation(net, probe_inputs(t, sc, a.probes));
    std::ofstream os(out_dir / (stem + "_state_relation.csv"), std::ios::binary);
    os << text::join(st.columns, ",") << '\n';
    for (std::size_t i = 0; i < st.rows.rows(); ++i) {
      for (std::size_t j = 0; j < st.rows.cols(); ++j) os << (j ? "," : "") << text::format_double(st.rows(i, j));
      os << '\n';
    }
    say(g, "  state relation: " + (out_dir / (stem + "_state_relation.csv")).string());
  }
}

int cmd_eval(const Global& g, EvalArgs a) {
  // `eval --experiment E3` alone evaluates the report that `reproduce E3` wrote.
  if (a.checkpoint.empty() && a.report.empty() && !a.experiment.empty()) {
    a.report = (output_root(g) / a.experiment).string();
  }
  if (a.checkpoint.empty() == a.report.empty()) {
    throw CLI::ValidationError("eval", "give exactly one of --checkpoint or --report");
  }
  if (!a.checkpoint.empty()) {
    const fs::path ck(a.checkpoint);
    evaluate_one(g, ck, a, std::nullopt, a.out.empty() ? ck.parent_path() / "eval" : fs::path(a.out));
    return kOk;
  }
  const fs::path dir(a.report);
  if (!fs::exists(dir / "manifest")) throw MissingArtifact("no manifest in " + dir.string());
  const ExperimentConfig cfg = experiment_from_tree(config::read_file(dir / "manifest"));
  if (!a.experiment.empty() && a.experiment != cfg.id) {
    throw CLI::ValidationError("eval", "report holds " + cfg.id + ", not " + a.experiment);
  }
  if (!fs::exists(dir / "checkpoints")) throw MissingArtifact("report " + dir.string() + " has no checkpoints");
  std::vector<fs::path> cks;
  for (const auto& e : fs::directory_iterator(dir / "checkpoints"))
    if (e.path().extension() == ".ckpt") cks.push_back(e.path());
  std::sort(cks.begin(), cks.end());
  if (cks.empty()) throw MissingArtifact("report " + dir.string() + " has no checkpoints");
  for (const auto& ck : cks) evaluate_one(g, ck, a, cfg, a.out.empty() ? dir / "eval" : fs::path(a.out));
  return kOk;
}

// --- reproduce / report -------------------------------------------------------

struct ReproduceArgs {
  std::vector<std::string> ids;
  bool all = false;
  std::optional<std::uint64_t> seeds;
  std::optional<std::size_t> max_iterations;
  std::size_t jobs = 1;
};

int cmd_reproduce(const Global& g, const ReproduceArgs& a) {
  std::vector<std::string> ids = a.all ? builtin_ids() : a.ids;
  if (ids.empty()) throw CLI::ValidationError("reproduce", "name experiments (E1..E7) or pass --all");
  for (const auto& id : ids) builtin_experiment(id);  // unknown ids are usage errors
  bool all_passed = true;
  std::vector<std::string> summary;
  for (const auto& id : ids) {
    try {
      ExperimentConfig cfg = builtin_experiment(id);
      if (a.seeds) cfg.seeds = builtin::seed_range(*a.seeds);
      if (a.max_iterations) {
        for (auto& v : cfg.variants) v.hyper.iterations = std::min(v.hyper.iterations, *a.max_iterations);
      }
      RunOptions opt;
      opt.jobs = a.jobs;
      opt.keep_networks = true;
      if (g.verbosity > 1) opt.log = [](const std::string& s) { std::cout << "  " << s << std::endl; };
      say(g, "running " + id + ": " + cfg.title);
      const Report rep = run_experiment(cfg, opt);
      const fs::path dir = output_root(g) / id;
      write_report(rep, dir);
      for (const auto& c : checks_for(rep)) {
        all_passed = all_passed && c.passed;
        summary.push_back(std::string(c.passed ? "PASS " : "FAIL ") + id + " " + c.name + ": " + c.detail);
      }
      say(g, "  report: " + dir.string());
    } catch (const std::exception& e) {
      all_passed = false;
      summary.push_back("FAIL " + id + " (error): " + e.what());
    }
  }
  for (const auto& s : summary) std::cout << s << '\n';
  return all_passed ? kOk : kFailed;
}

int cmd_report(const Global& g, const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "manifest")) throw MissingArtifact("no manifest in " + dir);
  for (const auto& rel : rebuild_tables(dir)) say(g, "rebuilt " + rel);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physically guided neural networks with internal variables: pipe-flow studies"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  bool quiet = false, verbose = false;
  app.add_flag("-q,--quiet", quiet, "print errors only");
  app.add_flag("-v,--verbose", verbose, "print progress");
  app.add_option("-o,--out-root", g.out, "output root (default: $PGNNIV_OUT or ./pgnniv-out)");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "write a synthetic data set");
  gen->add_option("generator", ga.generator, "prediction | geometry | characterization")
      ->required()
      ->check(CLI::IsMember({"prediction", "geometry", "characterization"}));
  gen->add_option("--M", ga.m, "number of records")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", ga.seed, "generator seed")->required();
  gen->add_option("--file", ga.file, "output file");
  gen->add_option("--q-min", ga.q_min);
  gen->add_option("--q-max", ga.q_max);
  gen->add_option("--l-min", ga.l_min);
  gen->add_option("--l-max", ga.l_max);
  gen->add_option("--kappa-min", ga.kappa_min);
  gen->add_option("--kappa-max", ga.kappa_max);
  gen->add_option("--targets", ga.targets, "total | segments | segments_with_total")
      ->check(CLI::IsMember({"total", "segments", "segments_with_total"}));
  gen->add_option("--model", ga.model, "hazen_williams | darcy_weisbach")
      ->check(CLI::IsMember({"hazen_williams", "darcy_weisbach"}));
  gen->add_option("--noise", ga.noise, "Gaussian noise sigma on measured columns")->check(CLI::NonNegativeNumber);
  gen->add_option("--bias", ga.bias, "constant added to measured columns");
  gen->add_flag("--normalize", ga.normalize, "min-max scale every column");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train one network variant");
  tr->add_option("--experiment", ta.experiment, "built-in experiment id (E1..E7)");
  tr->add_option("--variant", ta.variant, "variant of the experiment");
  tr->add_option("--config", ta.config_file, "single-run config file");
  tr->add_option("--data", ta.data_file, "train on this data set instead of generating one");
  tr->add_option("--seed", ta.seed, "seed for data, initialization and batches");
  tr->add_option("--iterations", ta.iterations, "override N");
  tr->add_option("--out", ta.out, "run directory");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "evaluate stored networks");
  ev->add_option("--checkpoint", ea.checkpoint, "checkpoint file");
  ev->add_option("--report", ea.report, "report directory (evaluates every checkpoint)");
  ev->add_option("--experiment", ea.experiment, "evaluation plan of this built-in experiment");
  ev->add_option("--extrapolate", ea.extrapolate, "flow range lo:hi for out-of-sample metrics");
  ev->add_flag("--probe-state-relation", ea.probe, "export (input, PIL, output) probe table");
  ev->add_option("--probes", ea.probes, "probe count")->check(CLI::PositiveNumber);
  ev->add_option("--seed", ea.seed, "seed of the evaluation sets");
  ev->add_option("--out", ea.out, "output directory");

  ReproduceArgs ra;
  auto* rp = app.add_subcommand("reproduce", "run built-in studies and their checks");
  rp->add_option("ids", ra.ids, "experiment ids");
  rp->add_flag("--all", ra.all, "run E1..E7");
  rp->add_option("--seeds", ra.seeds, "use seeds 1..K")->check(CLI::PositiveNumber);
  rp->add_option("--max-iterations", ra.max_iterations, "cap N of every variant (smoke runs)")
      ->check(CLI::PositiveNumber);
  rp->add_option("--jobs", ra.jobs, "parallel training jobs")->check(CLI::PositiveNumber);

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "rebuild tables and curves from a report's traces");
  rep->add_option("--dir", report_dir, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  g.verbosity = quiet ? 0 : (verbose ? 2 : 1);

  try {
    if (*gen) return cmd_generate(g, ga);
    if (*tr) return cmd_train(g, ta);
    if (*ev) return cmd_eval(g, ea);
    if (*rp) return cmd_reproduce(g, ra);
    if (*rep) return cmd_report(g, report_dir);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigurationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return kMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
