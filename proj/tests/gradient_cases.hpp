#pragma once

// Op-level gradient cases shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "pgnniv/autodiff.hpp"
#include "test_support.hpp"

namespace pgnniv::testing {

// Contracting the op's output with fixed random weights keeps every entry of
// the gradient distinct, which a plain sum would not.
inline Var contract(Var y, std::uint64_t seed) {
  Var w = y.tape().constant(random_matrix(y.shape().rows, y.shape().cols, seed));
  return sum(mul(y, w));
}

struct OpCase {
  std::string name;
  // a: 3x4 in [0.5, 1.5] (positive, away from relu kinks); b: 4x2 in [-1, 1].
  std::function<Var(Tape&, Var a, Var b)> build;
};

inline std::vector<OpCase> op_cases() {
  return {
      {"matmul", [](Tape&, Var a, Var b) { return matmul(a, b); }},
      {"add", [](Tape&, Var a, Var) { return add(a, square(a)); }},
      {"add_row", [](Tape& t, Var a, Var b) {
         Var row = matmul(t.constant(Matrix(1, 4, 1.0)), b);  // 1x2
         return add_row(matmul(a, b), row);
       }},
      {"sub", [](Tape&, Var a, Var b) { return sub(matmul(a, b), square(matmul(a, b))); }},
      {"mul", [](Tape&, Var a, Var) { return mul(a, a); }},
      {"scale", [](Tape&, Var a, Var) { return scale(a, -2.5); }},
      {"scale_by", [](Tape&, Var a, Var b) { return scale_by(a, sum(b)); }},
      {"add_scalar", [](Tape&, Var a, Var) { return square(add_scalar(a, 0.3)); }},
      {"pow_scalar", [](Tape&, Var a, Var) { return pow_scalar(a, 1.852); }},
      {"signed_pow", [](Tape&, Var a, Var b) { return signed_pow(matmul(a, b), 1.852); }},
      {"square", [](Tape&, Var a, Var) { return square(a); }},
      {"relu", [](Tape&, Var a, Var b) { return relu(matmul(a, b)); }},
      {"sum", [](Tape&, Var a, Var) { return scale(sum(square(a)), 1.0); }},
      {"mean", [](Tape&, Var a, Var b) { return mean(mul(matmul(a, b), matmul(a, b))); }},
      {"column", [](Tape&, Var a, Var) { return column(a, 2); }},
      {"concat", [](Tape&, Var a, Var b) {
         const Var parts[] = {column(a, 0), matmul(a, b), square(column(a, 3))};
         return concat_columns(parts);
       }},
  };
}

/// Largest relative gradient error of `c` over both operands.
inline double op_gradient_error(const OpCase& c) {
  Param a("a", random_matrix(3, 4, 11, 0.5, 1.5));
  Param b("b", random_matrix(4, 2, 12));
  auto value = [&] {
    Tape t;
    return contract(c.build(t, t.parameter(a), t.parameter(b)), 99).value()[0];
  };
  Tape t;
  Var f = contract(c.build(t, t.parameter(a), t.parameter(b)), 99);
  const Gradients g = backward(t, f);
  return std::max(max_rel_diff(g.of(a), finite_difference(a, value)), max_rel_diff(g.of(b), finite_difference(b, value)));
}

}  // namespace pgnniv::testing
