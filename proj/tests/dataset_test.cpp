#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "pgnniv/dataset.hpp"
#include "pgnniv/hydraulics.hpp"
#include "test_support.hpp"

using namespace pgnniv;
using pgnniv::testing::rel_diff;
using pgnniv::testing::scratch_dir;

namespace {

std::string bytes_of(const Dataset& ds) {
  std::ostringstream os;
  write_dataset(os, ds);
  return os.str();
}

std::vector<double> values_of(const Dataset& ds) {
  const auto v = ds.data().values();
  return {v.begin(), v.end()};
}

Dataset read_text(const std::string& s, const std::vector<std::string>& required = {}) {
  std::istringstream is(s);
  return read_dataset(is, required);
}

TEST(Dataset, SameSeedSameBytes) {
  const auto p = hydraulics::reference_pipe();
  const auto a = generate_prediction_dataset(500, {0.1, 5.0}, p, 11);
  const auto b = generate_prediction_dataset(500, {0.1, 5.0}, p, 11);
  const auto c = generate_prediction_dataset(500, {0.1, 5.0}, p, 12);
  EXPECT_EQ(bytes_of(a), bytes_of(b));
  EXPECT_NE(bytes_of(a), bytes_of(c));
}

TEST(Dataset, CleanPredictionRecordsArePhysicallyConsistent) {
  const auto p = hydraulics::reference_pipe();
  const auto ds = generate_prediction_dataset(2000, {0.1, 5.0}, p, 3, TargetLayout::SegmentsWithTotal);
  const Matrix& d = ds.data();
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const double q = d(i, 0);
    ASSERT_GE(q, 0.1);
    ASSERT_LE(q, 5.0);
    EXPECT_LT(rel_diff(d(i, 1) + d(i, 2) + d(i, 3), d(i, 4), 1e-300), 1e-12);
    EXPECT_LT(rel_diff(d(i, 4), hydraulics::total_pressure_drop(q, p), 1e-300), 1e-12);
  }
  EXPECT_EQ(ds.names_with(ColumnRole::Target), (std::vector<std::string>{"dp1", "dpe", "dp2"}));
  EXPECT_EQ(ds.names_with(ColumnRole::Aux), (std::vector<std::string>{"dp"}));
}

TEST(Dataset, DarcyWeisbachTotalIsSegmentSum) {
  const auto p = hydraulics::reference_pipe();
  const auto tot = generate_prediction_dataset(50, {0.5, 2.0}, p, 5, TargetLayout::Total, LossModel::DarcyWeisbach);
  for (std::size_t i = 0; i < tot.rows(); ++i) {
    const double q = tot.data()(i, 0);
    EXPECT_DOUBLE_EQ(tot.data()(i, 1), hydraulics::segment_pressure_drops_darcy(q, p).total());
  }
}

TEST(Dataset, GeometryRecordsMatchOracle) {
  const auto p = hydraulics::geometry_params();
  const auto ds = generate_geometry_dataset(300, {1.0, 5.0}, {0.0, 20.0}, p, 4);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const double q = ds.data()(i, 0), l1 = ds.data()(i, 1), l2 = ds.data()(i, 2);
    ASSERT_GE(l1, 0.0);
    ASSERT_LE(l2, 20.0);
    hydraulics::PipeParams pl = p;
    // Lengths of exactly zero are not valid pipe parameters; the drop is linear in each.
    pl.delta1 = 1.0;
    pl.delta2 = 1.0;
    const auto unit = hydraulics::segment_pressure_drops(q, pl);
    EXPECT_LT(rel_diff(ds.data()(i, 3), unit.dp1 * l1 + unit.dpe + unit.dp2 * l2, 1e-300), 1e-12);
  }
}

TEST(Dataset, GeometryGridCoversEndPoints) {
  const auto g = geometry_grid(3, 2, {1.0, 5.0}, {0.0, 10.0}, hydraulics::geometry_params());
  ASSERT_EQ(g.rows(), 12u);
  EXPECT_EQ(g.data()(0, 0), 1.0);
  EXPECT_EQ(g.data()(0, 1), 0.0);
  EXPECT_EQ(g.data()(11, 0), 5.0);
  EXPECT_EQ(g.data()(11, 2), 10.0);
  EXPECT_THROW(geometry_grid(1, 2, {1.0, 5.0}, {0.0, 10.0}, hydraulics::geometry_params()), ConfigurationError);
}

TEST(Dataset, CharacterizationTargetsInvertObservations) {
  const auto p = characterization_params();
  const auto ds = generate_characterization_dataset(500, {0.5, 5.0}, {80.0, 140.0}, p, 9);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const Matrix& d = ds.data();
    const double r[] = {d(i, 0), d(i, 1), d(i, 2), d(i, 3), d(i, 4), d(i, 5)};
    ASSERT_GE(r[4], 80.0);
    ASSERT_LE(r[5], 140.0);
    const auto k = hydraulics::roughness_from_observation(r[0], r[1], r[2], r[3], p);
    EXPECT_LT(rel_diff(k.kappa1, r[4]), 1e-9);
    EXPECT_LT(rel_diff(k.kappa2, r[5]), 1e-9);
    EXPECT_GT(r[1], r[2]);
    EXPECT_GT(r[2], r[3]);
  }
}

TEST(DatasetProperty, NoiseHasRequestedMoments) {
  const auto clean = generate_prediction_dataset(100000, {0.1, 5.0}, hydraulics::reference_pipe(), 21);
  const double sigma = 0.5;
  const auto noisy = add_noise(clean, sigma, 22);
  for (std::size_t j = 0; j < 2; ++j) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < clean.rows(); ++i) {
      const double e = noisy.data()(i, j) - clean.data()(i, j);
      sum += e;
      sq += e * e;
    }
    const double n = static_cast<double>(clean.rows());
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_LT(std::abs(mean), 3.0 * sigma / std::sqrt(n)) << j;
    EXPECT_LT(std::abs(var / (sigma * sigma) - 1.0), 0.1) << j;
  }
}

TEST(Dataset, NoiseAndBiasSkipLatentColumns) {
  const auto ds = generate_characterization_dataset(200, {0.5, 5.0}, {80.0, 140.0}, characterization_params(), 2);
  const auto noisy = add_noise(add_bias(ds, 0.3), 0.1, 5);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    EXPECT_EQ(noisy.data()(i, 4), ds.data()(i, 4));
    EXPECT_EQ(noisy.data()(i, 5), ds.data()(i, 5));
  }
  const auto biased = add_bias(ds, 0.3);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(biased.data()(7, j) - ds.data()(7, j), 0.3, 1e-12);
}

TEST(Dataset, ZeroNoiseLeavesDataUntouched) {
  const auto ds = generate_prediction_dataset(20, {0.1, 5.0}, hydraulics::reference_pipe(), 1);
  EXPECT_EQ(values_of(add_noise(ds, 0.0, 4)), values_of(ds));
  EXPECT_THROW(add_noise(ds, -1.0, 4), ConfigurationError);
}

TEST(Dataset, RegenerateFromProvenanceIsExact) {
  const auto base = generate_prediction_dataset(300, {0.1, 5.0}, hydraulics::reference_pipe(), 8,
                                                TargetLayout::SegmentsWithTotal);
  const auto ds = normalize_minmax(add_noise(add_bias(base, -0.2), 0.1, 31)).first;
  EXPECT_EQ(bytes_of(regenerate(ds.provenance())), bytes_of(ds));

  const auto ch = generate_characterization_dataset(50, {0.5, 5.0}, {80.0, 140.0}, characterization_params(), 3);
  EXPECT_EQ(bytes_of(regenerate(ch.provenance())), bytes_of(ch));
  const auto geo = generate_geometry_dataset(50, {1.0, 5.0}, {0.0, 20.0}, hydraulics::geometry_params(), 3);
  EXPECT_EQ(bytes_of(regenerate(geo.provenance())), bytes_of(geo));
}

TEST(Dataset, SaveLoadRoundTripIsBitExact) {
  const auto ds = add_noise(generate_prediction_dataset(400, {0.1, 5.0}, hydraulics::reference_pipe(), 6), 0.1, 2);
  const auto dir = scratch_dir("dataset_roundtrip");
  save(ds, dir / "d.csv");
  const auto back = load(dir / "d.csv", {"q", "dp"});
  EXPECT_EQ(values_of(back), values_of(ds));
  EXPECT_EQ(back.provenance(), ds.provenance());
  ASSERT_EQ(back.schema().size(), ds.schema().size());
  for (std::size_t j = 0; j < ds.schema().size(); ++j) {
    EXPECT_EQ(back.schema()[j].name, ds.schema()[j].name);
    EXPECT_EQ(back.schema()[j].role, ds.schema()[j].role);
    EXPECT_EQ(back.schema()[j].measured, ds.schema()[j].measured);
  }
}

TEST(DatasetErrors, ParseErrorsCarryLineNumbers) {
  const std::string head = "#pgnniv-dataset 1\n#column q m^3/s input measured\n#column dp Pa target measured\nq,dp\n";
  try {
    read_text(head + "1,2\n3,oops\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
  try {
    read_text(head + "1,2,3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5u);
  }
  EXPECT_THROW(read_text("q,dp\n1,2\n"), ParseError);
  EXPECT_THROW(read_text("#pgnniv-dataset 1\n#column q m^3/s sideways measured\nq\n1\n"), ParseError);
  EXPECT_THROW(read_text("#pgnniv-dataset 1\n#column q m^3/s input measured\n"), ParseError);
}

TEST(DatasetErrors, SchemaErrors) {
  const std::string head = "#pgnniv-dataset 1\n#column q m^3/s input measured\n#column dp Pa target measured\n";
  EXPECT_THROW(read_text(head + "q\n1\n"), SchemaError);
  EXPECT_THROW(read_text(head + "q,dp,x\n1,2,3\n"), SchemaError);
  EXPECT_THROW(read_text(head + "q,dp\n1,2\n", {"kappa1"}), SchemaError);
  EXPECT_NO_THROW(read_text(head + "q,dp\n1,2\n", {"q", "dp"}));
  Provenance bogus{{"generator", "tides"}};
  EXPECT_THROW(regenerate(bogus), SchemaError);
}

TEST(DatasetErrors, InvalidGeneratorArguments) {
  const auto p = hydraulics::reference_pipe();
  EXPECT_THROW(generate_prediction_dataset(0, {0.1, 5.0}, p, 1), std::exception);
  EXPECT_THROW(generate_prediction_dataset(10, {0.0, 5.0}, p, 1), ConfigurationError);
  EXPECT_THROW(generate_prediction_dataset(10, {5.0, 1.0}, p, 1), std::exception);
  EXPECT_THROW(generate_geometry_dataset(10, {1.0, 5.0}, {-1.0, 5.0}, p, 1), ConfigurationError);
  EXPECT_THROW(generate_characterization_dataset(10, {1.0, 5.0}, {0.0, 5.0}, p, 1), ConfigurationError);
}

TEST(Scaling, NormalizeThenDenormalizeRoundTrips) {
  const auto ds = generate_prediction_dataset(300, {0.1, 5.0}, hydraulics::reference_pipe(), 6);
  const auto [norm, sc] = normalize_minmax(ds);
  double lo = 1.0, hi = 0.0;
  for (double v : norm.data().values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 1.0);
  const auto back = denormalize(norm, sc);
  for (std::size_t i = 0; i < ds.data().size(); ++i) EXPECT_LT(rel_diff(back.data()[i], ds.data()[i]), 1e-12);
  EXPECT_EQ(back.provenance(), ds.provenance());
  EXPECT_EQ(bytes_of(apply_scaling(ds, sc)), bytes_of(norm));
}

TEST(Scaling, ConstantColumnIsDegenerate) {
  const std::string text =
      "#pgnniv-dataset 1\n#column q m^3/s input measured\n#column dp Pa target measured\nq,dp\n1,2\n1,3\n";
  EXPECT_THROW(normalize_minmax(read_text(text)), DegenerateScaleError);
  Scaling s;
  EXPECT_THROW(s.index("q"), SchemaError);
}

}  // namespace
