#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pgnniv/autodiff.hpp"
#include "pgnniv/errors.hpp"
#include "gradient_cases.hpp"
#include "test_support.hpp"

using namespace pgnniv;
using pgnniv::testing::finite_difference;
using pgnniv::testing::max_rel_diff;
using pgnniv::testing::random_matrix;
using pgnniv::testing::contract;
using pgnniv::testing::OpCase;
using pgnniv::testing::op_cases;

namespace {

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const OpCase& c = GetParam();
  Param a("a", random_matrix(3, 4, 11, 0.5, 1.5));
  Param b("b", random_matrix(4, 2, 12));
  auto value = [&] {
    Tape t;
    return contract(c.build(t, t.parameter(a), t.parameter(b)), 99).value()[0];
  };
  Tape t;
  Var f = contract(c.build(t, t.parameter(a), t.parameter(b)), 99);
  const Gradients g = backward(t, f);

  // relu and signed_pow are only differentiable away from zero.
  if (c.name == "relu" || c.name == "signed_pow") {
    Tape probe;
    const Matrix z = matmul(probe.parameter(a), probe.parameter(b)).value();
    for (double x : z.values()) ASSERT_GT(std::abs(x), 1e-4) << "test point sits on a kink";
  }
  EXPECT_LT(max_rel_diff(g.of(a), finite_difference(a, value)), 1e-5) << c.name << " wrt a";
  EXPECT_LT(max_rel_diff(g.of(b), finite_difference(b, value)), 1e-5) << c.name << " wrt b";
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(op_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(Autodiff, SumOfProductGradientOnRandomMatrices) {
  Param a("A", random_matrix(3, 4, 1));
  Param b("B", random_matrix(4, 2, 2));
  auto f = [&] {
    Tape t;
    return sum(matmul(t.parameter(a), t.parameter(b))).value()[0];
  };
  Tape t;
  const Gradients g = backward(t, sum(matmul(t.parameter(a), t.parameter(b))));
  EXPECT_LT(max_rel_diff(g.of(a), finite_difference(a, f)), 1e-5);
  // d/dA sum(AB) = 1 * B^T: row i of the gradient is the row sums of B.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(g.of(a)(i, k), b.value()(k, 0) + b.value()(k, 1), 1e-14);
}

TEST(Autodiff, ReluSumGradientAwayFromKink) {
  Matrix x = random_matrix(1, 64, 5);
  for (double& v : x.values())
    if (std::abs(v) < 1e-4) v = 0.5;
  Param p("x", x);
  Tape t;
  const Gradients g = backward(t, sum(relu(t.parameter(p))));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(g.of(p)[i], x[i] > 0 ? 1.0 : 0.0);
  auto f = [&] {
    Tape tt;
    return sum(relu(tt.parameter(p))).value()[0];
  };
  EXPECT_LT(max_rel_diff(g.of(p), finite_difference(p, f)), 1e-5);
}

TEST(Autodiff, ReluSubgradientAtZeroIsZero) {
  Param p("x", Matrix{{0.0, -0.0, 1.0}});
  Tape t;
  const Gradients g = backward(t, sum(relu(t.parameter(p))));
  EXPECT_EQ(g.of(p)[0], 0.0);
  EXPECT_EQ(g.of(p)[1], 0.0);
  EXPECT_EQ(g.of(p)[2], 1.0);
}

TEST(Autodiff, HazenWilliamsPowerDerivative) {
  Param q("q", Matrix::scalar(2.0));
  Tape t;
  const Gradients g = backward(t, sum(pow_scalar(t.parameter(q), 1.8520)));
  const double expected = 1.8520 * std::pow(2.0, 0.8520);
  EXPECT_LT(std::abs(g.of(q)[0] - expected) / expected, 1e-6);
}

TEST(Autodiff, MeanSquaredErrorOfLinearModel) {
  const Matrix x = random_matrix(6, 3, 21);
  const Matrix target = random_matrix(6, 1, 22);
  Param w("w", random_matrix(3, 1, 23));
  auto objective = [&](Tape& t) { return mean(square(sub(matmul(t.constant(x), t.parameter(w)), t.constant(target)))); };
  auto f = [&] {
    Tape t;
    return objective(t).value()[0];
  };
  Tape t;
  const Gradients g = backward(t, objective(t));
  EXPECT_LT(max_rel_diff(g.of(w), finite_difference(w, f)), 1e-5);
}

TEST(Autodiff, BackwardIsLinearInSeed) {
  Param a("a", random_matrix(3, 4, 31));
  Param b("b", random_matrix(4, 2, 32));
  Tape t;
  Var f = sum(square(matmul(t.parameter(a), t.parameter(b))));
  const Matrix g1 = backward(t, f, 1.0).of(a);
  const Matrix g2 = backward(t, f, 2.0).of(a);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g2[i], 2.0 * g1[i]);
}

TEST(Autodiff, RepeatedBackwardIsDeterministic) {
  Param a("a", random_matrix(3, 4, 41));
  Tape t;
  Var f = sum(relu(square(t.parameter(a))));
  const Matrix g1 = backward(t, f).of(a);
  const Matrix g2 = backward(t, f).of(a);
  EXPECT_EQ(g1, g2);
}

TEST(Autodiff, ParameterUsedTwiceAccumulates) {
  Param a("a", Matrix::scalar(3.0));
  Tape t;
  Var x = t.parameter(a), y = t.parameter(a);
  EXPECT_DOUBLE_EQ(backward(t, sum(mul(x, y))).of(a)[0], 6.0);
}

TEST(Autodiff, UnusedParameterHasZeroGradient) {
  Param a("a", Matrix::scalar(3.0)), unused("u", Matrix(2, 2, 1.0));
  Tape t;
  const Gradients g = backward(t, sum(t.parameter(a)));
  EXPECT_FALSE(g.contains("u"));
  EXPECT_EQ(g.of(unused), Matrix(2, 2, 0.0));
}

TEST(Autodiff, SgdConvergesToAnalyticMinimum) {
  Param w("w", Matrix::scalar(0.0));
  std::vector<Param> params{w};
  std::size_t steps = 0;
  for (; steps < 10000; ++steps) {
    Tape t;
    const Gradients g = backward(t, sum(square(add_scalar(t.parameter(params[0]), -5.0))));
    sgd_step(params, g, 0.1);
    if (std::abs(params[0].value()[0] - 5.0) < 1e-6) break;
  }
  EXPECT_LT(steps, 10000u);
  EXPECT_NEAR(params[0].value()[0], 5.0, 1e-6);
}

TEST(AutodiffErrors, ShapeMismatchesThrow) {
  Tape t;
  Var a = t.constant(Matrix(2, 3)), b = t.constant(Matrix(2, 2));
  EXPECT_THROW(matmul(a, a), ShapeError);
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(mul(a, b), ShapeError);
  EXPECT_THROW(add_row(a, b), ShapeError);
  EXPECT_THROW(scale_by(a, b), ShapeError);
  EXPECT_THROW(column(a, 3), ShapeError);
  const Var parts[] = {a, t.constant(Matrix(3, 1))};
  EXPECT_THROW(concat_columns(parts), ShapeError);
}

TEST(AutodiffErrors, BackwardNeedsScalarOutput) {
  Tape t;
  Var a = t.constant(Matrix(2, 2, 1.0));
  EXPECT_THROW(backward(t, a), ContractError);
}

TEST(AutodiffErrors, FractionalPowerOfNonPositiveThrows) {
  Tape t;
  EXPECT_THROW(pow_scalar(t.constant(Matrix{{-1.0}}), 0.5), DomainError);
  EXPECT_NO_THROW(pow_scalar(t.constant(Matrix{{-1.0}}), 2.0));
  EXPECT_THROW(signed_pow(t.constant(Matrix{{1.0}}), -1.0), DomainError);
}

TEST(AutodiffErrors, MixingTapesThrows) {
  Tape t1, t2;
  EXPECT_THROW(add(t1.constant(Matrix(1, 1)), t2.constant(Matrix(1, 1))), ContractError);
}

TEST(AutodiffErrors, SgdRejectsNonPositiveRate) {
  std::vector<Param> params{Param("w", Matrix::scalar(1.0))};
  EXPECT_THROW(sgd_step(params, Gradients{}, 0.0), ContractError);
}

}  // namespace
