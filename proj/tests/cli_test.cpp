#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pgnniv/config.hpp"
#include "pgnniv/dataset.hpp"
#include "pgnniv/experiments.hpp"
#include "pgnniv/report.hpp"
#include "test_support.hpp"

using namespace pgnniv;
using pgnniv::testing::scratch_dir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

struct Cli {
  fs::path dir;
  std::string output;

  /// Runs the CLI with `args` inside `dir`, returns its exit status.
  int operator()(const std::string& args) {
    const fs::path log = dir / "cli.log";
    const std::string cmd = "cd '" + dir.string() + "' && '" PGNNIV_CLI "' -o out " + args + " > '" + log.string() +
                            "' 2>&1";
    const int status = std::system(cmd.c_str());
    output = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

TEST(Cli, GenerateIsDeterministic) {
  Cli cli{scratch_dir("cli_generate")};
  ASSERT_EQ(cli("generate prediction --M 50 --seed 3 --file a.csv"), 0) << cli.output;
  ASSERT_EQ(cli("generate prediction --M 50 --seed 3 --file b.csv"), 0) << cli.output;
  ASSERT_EQ(cli("generate prediction --M 50 --seed 4 --file c.csv"), 0) << cli.output;
  EXPECT_EQ(slurp(cli.dir / "a.csv"), slurp(cli.dir / "b.csv"));
  EXPECT_NE(slurp(cli.dir / "a.csv"), slurp(cli.dir / "c.csv"));
  const auto ds = load(cli.dir / "a.csv", {"q", "dp"});
  EXPECT_EQ(ds.rows(), 50u);
  const auto direct = generate_prediction_dataset(50, {0.1, 5.0}, hydraulics::reference_pipe(), 3);
  EXPECT_EQ(ds.provenance_value("seed"), direct.provenance_value("seed"));
}

TEST(Cli, GenerateCharacterizationWithNoise) {
  Cli cli{scratch_dir("cli_generate_char")};
  ASSERT_EQ(cli("generate characterization --M 30 --seed 1 --noise 0.01 --file k.csv"), 0) << cli.output;
  const auto ds = load(cli.dir / "k.csv", {"q", "p0", "p1", "p2", "kappa1", "kappa2"});
  EXPECT_EQ(ds.rows(), 30u);
  EXPECT_EQ(regenerate(ds.provenance()).data().size(), ds.data().size());
}

TEST(Cli, UsageErrorsExitWithTwo) {
  Cli cli{scratch_dir("cli_usage")};
  EXPECT_EQ(cli("generate tides --M 5 --seed 1"), 2);
  EXPECT_EQ(cli("generate prediction --seed 1"), 2);
  EXPECT_EQ(cli("generate prediction --M 5 --seed 1 --noise -1"), 2);
  EXPECT_EQ(cli("train --experiment E1 --variant nope --iterations 5"), 2);
  EXPECT_EQ(cli("eval"), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
}

TEST(Cli, MissingArtifactsExitWithFour) {
  Cli cli{scratch_dir("cli_missing")};
  EXPECT_EQ(cli("train --experiment E1 --variant constrained --data nope.csv --iterations 5"), 4) << cli.output;
  EXPECT_EQ(cli("eval --checkpoint nope.ckpt"), 4) << cli.output;
  EXPECT_EQ(cli("report --dir nowhere"), 4) << cli.output;
}

TEST(Cli, TrainReproducesTheLibraryTrace) {
  Cli cli{scratch_dir("cli_train")};
  ASSERT_EQ(cli("train --experiment E1 --variant constrained --seed 5 --iterations 200 --out run"), 0) << cli.output;
  ASSERT_TRUE(fs::exists(cli.dir / "run" / "checkpoint.ckpt"));
  ASSERT_TRUE(fs::exists(cli.dir / "run" / "run.cfg"));

  auto v = builtin::e1().variant("constrained");
  v.hyper.iterations = 200;
  const Dataset ds = variant_dataset(v, 5);
  Network net = build_variant(v, 5, ds);
  std::ostringstream expected;
  write_trace(expected, decimate(train(net, ds, v.hyper, 5), v.trace_stride));
  EXPECT_EQ(slurp(cli.dir / "run" / "trace.csv"), expected.str());

  ASSERT_EQ(cli("train --experiment E1 --variant constrained --seed 5 --iterations 200 --out run2"), 0);
  EXPECT_EQ(slurp(cli.dir / "run2" / "checkpoint.ckpt"), slurp(cli.dir / "run" / "checkpoint.ckpt"));
}

TEST(Cli, EvalWritesFiniteMetricsAndStateRelation) {
  Cli cli{scratch_dir("cli_eval")};
  ASSERT_EQ(cli("train --experiment E1 --variant constrained --seed 2 --iterations 1 --out run"), 0) << cli.output;
  ASSERT_EQ(cli("eval --checkpoint run/checkpoint.ckpt --probe-state-relation --probes 11 --out ev"), 0) << cli.output;
  std::ifstream is(cli.dir / "ev" / "checkpoint_eval.csv");
  const Metrics m = read_metrics(is);
  ASSERT_TRUE(m.count("test_rmse"));
  for (const auto& [k, v] : m) EXPECT_TRUE(std::isfinite(v)) << k;
  std::istringstream rel(slurp(cli.dir / "ev" / "checkpoint_state_relation.csv"));
  std::string header, line;
  std::getline(rel, header);
  EXPECT_EQ(header.rfind("x0,", 0), 0u) << header;
  std::size_t rows = 0;
  while (std::getline(rel, line)) ++rows;
  EXPECT_EQ(rows, 11u);
}

TEST(Cli, CustomConfigAndDivergence) {
  Cli cli{scratch_dir("cli_config")};
  auto v = builtin::e1().variant("constrained");
  v.name = "mine";
  v.hyper.iterations = 50;
  config::write_file(variant_tree(v), cli.dir / "ok.cfg");
  ASSERT_EQ(cli("train --config ok.cfg --seed 1 --out ok"), 0) << cli.output;
  EXPECT_TRUE(fs::exists(cli.dir / "ok" / "checkpoint.ckpt"));

  v.hyper.learning_rate = 1e3;
  v.hyper.divergence_limit = 1e6;
  config::write_file(variant_tree(v), cli.dir / "hot.cfg");
  EXPECT_EQ(cli("train --config hot.cfg --seed 1 --out hot"), 3) << cli.output;
  EXPECT_TRUE(fs::exists(cli.dir / "hot" / "trace.csv"));
  EXPECT_FALSE(fs::exists(cli.dir / "hot" / "checkpoint.ckpt"));

  std::ofstream(cli.dir / "broken.cfg") << "[network\nlayers = ???\n";
  EXPECT_NE(cli("train --config broken.cfg --seed 1"), 0);
}

TEST(Cli, ReproduceSmokeRunWritesAReport) {
  Cli cli{scratch_dir("cli_reproduce")};
  const int rc = cli("reproduce E1 --seeds 2 --max-iterations 100");
  // Two seeds cannot meet the ten-seed acceleration check, so the run reports a failed check.
  EXPECT_EQ(rc, 1) << cli.output;
  EXPECT_NE(cli.output.find("FAIL"), std::string::npos) << cli.output;
  ASSERT_TRUE(fs::exists(cli.dir / "out" / "E1" / "manifest"));
  const Report r = load_report(cli.dir / "out" / "E1");
  EXPECT_EQ(r.runs_of("constrained").size(), 2u);
  const std::string summary = slurp(cli.dir / "out" / "E1" / "tables" / "summary.csv");
  fs::remove_all(cli.dir / "out" / "E1" / "tables");
  ASSERT_EQ(cli("report --dir out/E1"), 0) << cli.output;
  EXPECT_EQ(slurp(cli.dir / "out" / "E1" / "tables" / "summary.csv"), summary);
}

}  // namespace
