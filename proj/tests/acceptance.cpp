// Acceptance runner: one PASS/FAIL line per criterion, at full scale.
//
//   pgnniv_acceptance [--out DIR] [--only gradients,oracle,E1,...]
//
// Reports of the studies land in DIR (default ./acceptance-out). The exit
// status is non-zero only when a criterion fails that is not listed in
// kKnownFailures; a known failure is still printed as FAIL.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gradient_cases.hpp"
#include "pgnniv/checks.hpp"
#include "pgnniv/experiments.hpp"
#include "pgnniv/hydraulics.hpp"
#include "pgnniv/report.hpp"
#include "test_support.hpp"

using namespace pgnniv;
namespace fs = std::filesystem;

namespace {

// Criteria that do not hold at the configured scale; see README "Known results".
const std::set<std::string> kKnownFailures{"noise filtering"};

using Clock = std::chrono::steady_clock;

struct Line {
  std::string name;
  bool passed;
  std::string detail;
  double seconds;
};

std::vector<Line> lines;

void record(const std::string& name, bool passed, const std::string& detail, Clock::time_point start) {
  const double s = std::chrono::duration<double>(Clock::now() - start).count();
  lines.push_back({name, passed, detail, s});
  std::cout << (passed ? "PASS  " : "FAIL  ") << name << " [" << text::format_double(s, 3) << " s]: " << detail
            << std::endl;
}

std::string fmt(double v) { return text::format_double(v, 3); }

// --- gradients ----------------------------------------------------------------

/// Worst relative error of OF and PEN gradients of a builtin variant on six records.
double objective_gradient_error(const Variant& variant, std::uint64_t seed) {
  Variant v = variant;
  v.data.m = 6;
  Scaling sc;
  const Dataset ds = variant_dataset(v, seed, &sc);
  Network net = build_variant(v, seed, ds, v.data.normalize ? &sc : nullptr);
  const TrainingData d = TrainingData::from(ds);
  const Matrix* aux = d.aux ? &*d.aux : nullptr;
  double worst = 0.0;
  for (const bool pen : {false, true}) {
    Tape tape;
    const Objective o = build_objective(tape, net, d.inputs, d.targets, aux);
    const double f0 = pen ? o.values().pen : o.values().of;
    if (pen && f0 == 0.0) continue;
    const Gradients g = backward(tape, pen ? o.pen : o.of);
    for (Param& p : net.params()) {
      const Matrix fd = testing::finite_difference(p, [&] {
        const auto l = loss(net, d);
        return pen ? l.pen : l.of;
      });
      worst = std::max(worst, testing::max_rel_diff(g.of(p), fd, testing::fd_floor(f0)));
    }
  }
  return worst;
}

void gradient_criterion() {
  const auto start = Clock::now();
  double worst_op = 0.0, worst_net = 0.0;
  std::string worst_name;
  for (const auto& c : testing::op_cases()) worst_op = std::max(worst_op, testing::op_gradient_error(c));
  std::size_t nets = 0;
  for (const char* id : {"E1", "E2", "E3", "E4", "E5", "E6"}) {
    const auto cfg = builtin_experiment(id);
    std::uint64_t seed = 100;
    for (const auto& v : cfg.variants) {
      const double e = objective_gradient_error(v, ++seed);
      ++nets;
      if (e > worst_net) {
        worst_net = e;
        worst_name = std::string(id) + "/" + v.name;
      }
    }
  }
  const bool ok = worst_op < 1e-5 && worst_net < 1e-5;
  record("gradient correctness", ok,
         "max rel error " + fmt(worst_op) + " over " + std::to_string(testing::op_cases().size()) + " ops, " +
             fmt(worst_net) + " over OF/PEN of " + std::to_string(nets) + " nets" +
             (worst_name.empty() ? "" : " (worst " + worst_name + ")") + "; need < 1e-5",
         start);
}

// --- oracle -------------------------------------------------------------------

void oracle_criterion() {
  const auto start = Clock::now();
  const auto p = hydraulics::reference_pipe();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uq(0.1, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double q = uq(rng);
    worst = std::max(worst, testing::rel_diff(hydraulics::total_pressure_drop(q, p),
                                              hydraulics::segment_pressure_drops(q, p).total(), 1e-300));
  }
  const auto g = hydraulics::geometry_params();
  double worst_k = 0.0;
  for (double q : {0.5, 1.0, 3.0, 7.5}) {
    const auto d = hydraulics::segment_pressure_drops(q, g);
    const double p2 = 1.0, p1 = p2 + d.dp2, p0 = p1 + d.dpe + d.dp1;
    const auto k = hydraulics::roughness_from_observation(q, p0, p1, p2, g);
    worst_k = std::max({worst_k, testing::rel_diff(k.kappa1, 140.0), testing::rel_diff(k.kappa2, 100.0)});
  }
  record("oracle identities", worst < 1e-12 && worst_k < 1e-9,
         "total vs segment sum " + fmt(worst) + " (need < 1e-12); roughness round trip " + fmt(worst_k) +
             " (need < 1e-9)",
         start);
}

// --- studies ------------------------------------------------------------------

Report run_study(const std::string& id, const fs::path& out) {
  std::cerr << "running " << id << " ..." << std::endl;
  const auto cfg = builtin_experiment(id);
  Report r = run_experiment(cfg, {.jobs = std::max(1u, std::thread::hardware_concurrency())});
  write_report(r, out / id);
  return r;
}

void study_criteria(const std::string& id, const fs::path& out) {
  const auto start = Clock::now();
  const Report r = run_study(id, out);
  for (const auto& c : checks_for(r)) record(c.name, c.passed, id + ": " + c.detail, start);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

/// Reruns the short E1 variants and compares trace files byte for byte.
void determinism_criterion(const fs::path& out) {
  const auto start = Clock::now();
  auto cfg = builtin::e1();
  std::vector<Variant> keep;
  for (const auto& v : cfg.variants)
    if (v.name != "constrained_long") keep.push_back(v);
  cfg.variants = keep;
  const Report again = run_experiment(cfg);
  std::size_t same = 0, total = 0;
  for (const auto& run : again.runs) {
    std::ostringstream os;
    write_trace(os, run.trace);
    ++total;
    if (os.str() == slurp(out / "E1" / "traces" / (run_stem(run.variant, run.seed) + ".csv"))) ++same;
  }
  record("determinism", total > 0 && same == total,
         std::to_string(same) + "/" + std::to_string(total) + " E1 trace files byte-identical on rerun", start);
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = "acceptance-out";
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      for (const auto& id : text::split(argv[++i], ',')) only.insert(id);
    } else {
      std::cerr << "usage: pgnniv_acceptance [--out DIR] [--only gradients,oracle,E1,...]\n";
      return 2;
    }
  }
  const auto want = [&](const std::string& id) { return only.empty() || only.count(id) > 0; };
  fs::create_directories(out);

  try {
    if (want("gradients")) gradient_criterion();
    if (want("oracle")) oracle_criterion();
    for (const char* id : {"E1", "E2", "E3", "E4", "E6"})
      if (want(id)) study_criteria(id, out);
    if (want("E1")) determinism_criterion(out);
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance runner: " << e.what() << std::endl;
    return 1;
  }

  std::size_t passed = 0, unexpected = 0;
  for (const auto& l : lines) {
    if (l.passed) ++passed;
    else if (!kKnownFailures.count(l.name)) ++unexpected;
  }
  std::cout << passed << "/" << lines.size() << " criteria passed";
  if (lines.size() != passed) std::cout << " (" << (lines.size() - passed - unexpected) << " known failure(s))";
  std::cout << std::endl;
  return unexpected == 0 ? 0 : 1;
}
