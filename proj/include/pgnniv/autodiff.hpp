#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every intermediate value of one forward evaluation in
// topological order; backward() walks it in reverse and accumulates adjoints.
// Tapes are cheap to build and are rebuilt for every training step.

#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgnniv/errors.hpp"
#include "pgnniv/matrix.hpp"

namespace pgnniv {

/// A named trainable matrix. The shape is fixed at construction.
class Param {
 public:
  Param(std::string id, Matrix value) : id_(std::move(id)), value_(std::move(value)) {}

  const std::string& id() const noexcept { return id_; }
  const Matrix& value() const noexcept { return value_; }
  Shape shape() const noexcept { return value_.shape(); }

  void set_value(const Matrix& v) { value_.assign(v); }
  std::span<double> data() noexcept { return value_.values(); }

 private:
  std::string id_;
  Matrix value_;
};

enum class Op {
  Constant,
  Parameter,
  MatMul,
  Add,
  AddRow,
  Sub,
  Mul,
  Scale,
  ScaleBy,
  AddScalar,
  PowScalar,
  SignedPow,
  Square,
  Relu,
  Sum,
  Mean,
  Column,
  Concat,
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape& tape() const { return *tape_; }
  std::size_t index() const noexcept { return index_; }
  const Matrix& value() const;
  Shape shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

/// Gradients keyed by Param id.
class Gradients {
 public:
  /// Gradient of `p`; zero when `p` did not take part in the computation.
  Matrix of(const Param& p) const {
    auto it = grads_.find(p.id());
    if (it == grads_.end()) return Matrix(p.shape().rows, p.shape().cols, 0.0);
    return it->second;
  }
  bool contains(const std::string& id) const { return grads_.contains(id); }
  const std::map<std::string, Matrix>& all() const noexcept { return grads_; }

  void accumulate(const std::string& id, const Matrix& g) {
    auto [it, inserted] = grads_.try_emplace(id, g);
    if (!inserted) {
      for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
    }
  }

 private:
  std::map<std::string, Matrix> grads_;
};

class Tape {
 public:
  struct Node {
    Op op;
    std::size_t lhs = 0;
    std::size_t rhs = 0;
    std::vector<std::size_t> inputs;  // Concat only
    double scalar = 0.0;
    std::size_t aux = 0;
    const Param* param = nullptr;
    Matrix value;
    Matrix adjoint;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(Node{.op = Op::Constant, .value = std::move(value)}); }

  Var parameter(const Param& p) {
    return push(Node{.op = Op::Parameter, .param = &p, .value = p.value()});
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const Matrix& value(Var v) const { return nodes_.at(v.index()).value; }
  const Matrix& adjoint(Var v) const { return nodes_.at(v.index()).adjoint; }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  Node& mutable_node(std::size_t i) { return nodes_[i]; }

  void zero_adjoints() {
    for (auto& n : nodes_) n.adjoint = Matrix(n.value.rows(), n.value.cols(), 0.0);
  }

 private:
  std::deque<Node> nodes_;  // stable references: values stay valid while the tape grows
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

namespace detail {

inline void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands belong to different tapes");
}

inline void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  }
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b);
  if (a.shape().cols != b.shape().rows) {
    throw ShapeError("matmul: inner dimensions differ for " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  Matrix out(a.shape().rows, b.shape().cols);
  gemm(a.value(), b.value(), out);
  return a.tape().push({.op = Op::MatMul, .lhs = a.index(), .rhs = b.index(), .value = std::move(out)});
}

inline Var add(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("add", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().push({.op = Op::Add, .lhs = a.index(), .rhs = b.index(), .value = std::move(out)});
}

/// Adds a 1 x c row to every row of an n x c matrix (bias broadcast).
inline Var add_row(Var a, Var row) {
  detail::require_same_tape(a, row);
  if (row.shape().rows != 1 || row.shape().cols != a.shape().cols) {
    throw ShapeError("add_row: cannot broadcast " + to_string(row.shape()) + " over " +
                     to_string(a.shape()));
  }
  Matrix out = a.value();
  const auto& r = row.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r[j];
  return a.tape().push({.op = Op::AddRow, .lhs = a.index(), .rhs = row.index(), .value = std::move(out)});
}

inline Var sub(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("sub", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().push({.op = Op::Sub, .lhs = a.index(), .rhs = b.index(), .value = std::move(out)});
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("mul", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().push({.op = Op::Mul, .lhs = a.index(), .rhs = b.index(), .value = std::move(out)});
}

inline Var scale(Var a, double c) {
  Matrix out = detail::map(a.value(), [c](double x) { return c * x; });
  return a.tape().push({.op = Op::Scale, .lhs = a.index(), .scalar = c, .value = std::move(out)});
}

/// Multiplies every entry of `a` by the 1x1 node `s`.
inline Var scale_by(Var a, Var s) {
  detail::require_same_tape(a, s);
  if (s.shape() != Shape{1, 1}) throw ShapeError("scale_by: factor must be 1x1, got " + to_string(s.shape()));
  const double c = s.value()[0];
  Matrix out = detail::map(a.value(), [c](double x) { return c * x; });
  return a.tape().push({.op = Op::ScaleBy, .lhs = a.index(), .rhs = s.index(), .value = std::move(out)});
}

inline Var add_scalar(Var a, double c) {
  Matrix out = detail::map(a.value(), [c](double x) { return x + c; });
  return a.tape().push({.op = Op::AddScalar, .lhs = a.index(), .scalar = c, .value = std::move(out)});
}

/// Elementwise x^e. Non-integer exponents require strictly positive entries.
inline Var pow_scalar(Var a, double e) {
  const bool integral = std::floor(e) == e;
  for (double x : a.value().values()) {
    if (!integral && !(x > 0.0)) {
      throw DomainError("pow_scalar: base " + std::to_string(x) + " with fractional exponent " +
                        std::to_string(e));
    }
  }
  Matrix out = detail::map(a.value(), [e](double x) { return std::pow(x, e); });
  return a.tape().push({.op = Op::PowScalar, .lhs = a.index(), .scalar = e, .value = std::move(out)});
}

/// Odd power extension sign(x)|x|^e, defined for every real x when e > 0.
inline Var signed_pow(Var a, double e) {
  if (!(e > 0.0)) throw DomainError("signed_pow: exponent must be positive");
  Matrix out = detail::map(a.value(), [e](double x) { return std::copysign(std::pow(std::abs(x), e), x); });
  return a.tape().push({.op = Op::SignedPow, .lhs = a.index(), .scalar = e, .value = std::move(out)});
}

inline Var square(Var a) {
  Matrix out = detail::map(a.value(), [](double x) { return x * x; });
  return a.tape().push({.op = Op::Square, .lhs = a.index(), .value = std::move(out)});
}

inline Var relu(Var a) {
  Matrix out = detail::map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  return a.tape().push({.op = Op::Relu, .lhs = a.index(), .value = std::move(out)});
}

inline Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  return a.tape().push({.op = Op::Sum, .lhs = a.index(), .value = Matrix::scalar(s)});
}

inline Var mean(Var a) {
  if (a.value().size() == 0) throw ContractError("mean of an empty matrix");
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  return a.tape().push(
      {.op = Op::Mean, .lhs = a.index(), .value = Matrix::scalar(s / static_cast<double>(a.value().size()))});
}

/// Column `j` of `a` as an n x 1 node.
inline Var column(Var a, std::size_t j) {
  if (j >= a.shape().cols) {
    throw ShapeError("column " + std::to_string(j) + " out of range for " + to_string(a.shape()));
  }
  const auto& v = a.value();
  Matrix out(v.rows(), 1);
  for (std::size_t i = 0; i < v.rows(); ++i) out[i] = v(i, j);
  return a.tape().push({.op = Op::Column, .lhs = a.index(), .aux = j, .value = std::move(out)});
}

/// Horizontal concatenation of nodes sharing a row count.
inline Var concat_columns(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_columns of nothing");
  const std::size_t rows = parts.front().shape().rows;
  std::size_t cols = 0;
  std::vector<std::size_t> inputs;
  for (const Var& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.shape().rows != rows) throw ShapeError("concat_columns: row counts differ");
    cols += p.shape().cols;
    inputs.push_back(p.index());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    offset += v.cols();
  }
  return parts.front().tape().push({.op = Op::Concat, .inputs = std::move(inputs), .value = std::move(out)});
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

/// Reverse sweep from a scalar output. Adjoints are reset first, so calling it
/// twice on the same tape yields identical gradients.
inline Gradients backward(Tape& tape, Var output, double seed = 1.0) {
  if (output.shape() != Shape{1, 1}) {
    throw ContractError("backward requires a 1x1 output, got " + to_string(output.shape()));
  }
  tape.zero_adjoints();
  tape.mutable_node(output.index()).adjoint[0] = seed;

  Gradients grads;
  for (std::size_t k = output.index() + 1; k-- > 0;) {
    Tape::Node& n = tape.mutable_node(k);
    const Matrix& g = n.adjoint;
    auto parent = [&](std::size_t i) -> Tape::Node& { return tape.mutable_node(i); };

    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Parameter:
        grads.accumulate(n.param->id(), g);
        break;
      case Op::MatMul: {
        Tape::Node& a = parent(n.lhs);
        Tape::Node& b = parent(n.rhs);
        gemm_nt(g, b.value, a.adjoint);
        gemm_tn(a.value, g, b.adjoint);
        break;
      }
      case Op::Add: {
        Matrix& ga = parent(n.lhs).adjoint;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Matrix& gb = parent(n.rhs).adjoint;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        break;
      }
      case Op::AddRow: {
        Matrix& ga = parent(n.lhs).adjoint;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Matrix& gr = parent(n.rhs).adjoint;
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
        break;
      }
      case Op::Sub: {
        Matrix& ga = parent(n.lhs).adjoint;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Matrix& gb = parent(n.rhs).adjoint;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        break;
      }
      case Op::Mul: {
        Tape::Node& a = parent(n.lhs);
        Tape::Node& b = parent(n.rhs);
        for (std::size_t i = 0; i < g.size(); ++i) {
          a.adjoint[i] += g[i] * b.value[i];
          b.adjoint[i] += g[i] * a.value[i];
        }
        break;
      }
      case Op::Scale: {
        Matrix& ga = parent(n.lhs).adjoint;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
        break;
      }
      case Op::ScaleBy: {
        Tape::Node& a = parent(n.lhs);
        Tape::Node& s = parent(n.rhs);
        const double c = s.value[0];
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          a.adjoint[i] += c * g[i];
          acc += g[i] * a.value[i];
        }
        s.adjoint[0] += acc;
        break;
      }
      case Op::AddScalar: {
        Matrix& ga = parent(n.lhs).adjoint;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::PowScalar: {
        Tape::Node& a = parent(n.lhs);
        const double e = n.scalar;
        for (std::size_t i = 0; i < g.size(); ++i) a.adjoint[i] += g[i] * e * std::pow(a.value[i], e - 1.0);
        break;
      }
      case Op::SignedPow: {
        Tape::Node& a = parent(n.lhs);
        const double e = n.scalar;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double x = std::abs(a.value[i]);
          if (x > 0.0 || e >= 1.0) a.adjoint[i] += g[i] * e * std::pow(x, e - 1.0);
        }
        break;
      }
      case Op::Square: {
        Tape::Node& a = parent(n.lhs);
        for (std::size_t i = 0; i < g.size(); ++i) a.adjoint[i] += 2.0 * a.value[i] * g[i];
        break;
      }
      case Op::Relu: {
        Tape::Node& a = parent(n.lhs);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (a.value[i] > 0.0) a.adjoint[i] += g[i];
        break;
      }
      case Op::Sum: {
        Matrix& ga = parent(n.lhs).adjoint;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      }
      case Op::Mean: {
        Matrix& ga = parent(n.lhs).adjoint;
        const double w = g[0] / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += w;
        break;
      }
      case Op::Column: {
        Matrix& ga = parent(n.lhs).adjoint;
        for (std::size_t i = 0; i < g.rows(); ++i) ga(i, n.aux) += g[i];
        break;
      }
      case Op::Concat: {
        std::size_t offset = 0;
        for (std::size_t idx : n.inputs) {
          Matrix& gp = parent(idx).adjoint;
          for (std::size_t i = 0; i < gp.rows(); ++i)
            for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, offset + j);
          offset += gp.cols();
        }
        break;
      }
    }
  }
  return grads;
}

/// Plain gradient descent: value <- value - learning_rate * grad.
template <typename ParamRange>
void sgd_step(ParamRange& params, const Gradients& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw ContractError("learning rate must be positive");
  for (Param& p : params) {
    auto it = grads.all().find(p.id());
    if (it == grads.all().end()) continue;
    auto data = p.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= learning_rate * it->second[i];
  }
}

}  // namespace pgnniv
