#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "ralab/activation.hpp"
#include "ralab/core.hpp"

namespace ralab::diff {

// Elementwise scalar map recorded on a tape. `param` carries the leaky slope
// for the leaky kinds; `activation` is consulted by the *Activation kinds.
struct Unary {
  enum class Kind {
    Relu,
    LeakyRelu,
    Softplus,
    Tanh,
    Sigmoid,
    Square,
    Log,
    Exp,
    Activation,                // sigma
    InverseActivation,         // sigma^{-1}
    LogInverseDerivative,      // log (sigma^{-1})'
  };
  Kind kind = Kind::Relu;
  double param = 0.0;
  ralab::Activation activation{};

  static Unary relu() { return {Kind::Relu, 0.0, {}}; }
  static Unary leaky_relu(double slope) { return {Kind::LeakyRelu, slope, {}}; }
  static Unary softplus() { return {Kind::Softplus, 0.0, {}}; }
  static Unary tanh() { return {Kind::Tanh, 0.0, {}}; }
  static Unary sigmoid() { return {Kind::Sigmoid, 0.0, {}}; }
  static Unary square() { return {Kind::Square, 0.0, {}}; }
  static Unary log() { return {Kind::Log, 0.0, {}}; }
  static Unary exp() { return {Kind::Exp, 0.0, {}}; }
  static Unary forward(const ralab::Activation& a) { return {Kind::Activation, 0.0, a}; }
  static Unary inverse(const ralab::Activation& a) { return {Kind::InverseActivation, 0.0, a}; }
  static Unary log_inverse_derivative(const ralab::Activation& a) {
    return {Kind::LogInverseDerivative, 0.0, a};
  }

  double value(double x) const;
  double derivative(double x) const;
  std::string_view name() const;
};

// Handle to a node on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

// Reverse-mode tape over dense matrices.
//
// Ops execute eagerly as they are recorded. After changing leaf values with
// set(), forward() replays the recorded program in order, so a tape built once
// can be reused across optimizer steps as long as leaf shapes stay fixed.
// backward() walks nodes in exact reverse recording order, which is a valid
// reverse topological order because operands always precede their users.
class Tape {
 public:
  Var input(Matrix value);     // differentiable leaf
  Var constant(Matrix value);  // non-differentiable leaf
  void set(Var leaf, const Matrix& value);

  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);        // elementwise
  Var scale(Var a, double s);
  Var shift(Var a, double s);   // a + s
  Var add_row(Var m, Var row);  // row (1 x c) broadcast over the rows of m
  Var sub_row(Var m, Var row);
  Var add_scalar(Var m, Var s); // s (1 x 1) broadcast over m
  Var unary(Var a, const Unary& u);
  Var sum(Var a);               // -> 1 x 1
  Var mean(Var a);              // -> 1 x 1
  Var row_sum(Var a);           // -> rows x 1
  Var log_sum_exp_rows(Var a);  // -> rows x 1
  Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);

  Var relu(Var a) { return unary(a, Unary::relu()); }
  Var square(Var a) { return unary(a, Unary::square()); }
  Var log(Var a) { return unary(a, Unary::log()); }
  Var exp(Var a) { return unary(a, Unary::exp()); }

  // Recompute every non-leaf node from current leaf values.
  void forward();
  // Populate adjoints of every differentiable node w.r.t. a scalar root.
  void backward(Var root);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  const Matrix& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Input, Constant, MatMul, MatMulNT, Add, Sub, Mul, Scale, Shift, AddRow, SubRow,
    AddScalar, Unary, Sum, Mean, RowSum, LogSumExpRows, Reshape
  };
  struct Node {
    Op op;
    std::size_t a = 0;
    std::size_t b = 0;
    double s = 0.0;
    Unary u{};
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    bool requires_grad = false;
    Matrix value;
    Matrix adjoint;
  };

  Var push(Node node);
  void evaluate(std::size_t i);
  const Node& node(Var v) const;
  static std::string_view op_name(Op op);

  std::vector<Node> nodes_;
};

// Builds a scalar program from a k x 1 leaf.
using ScalarProgram = std::function<Var(Tape&, Var)>;

double evaluate(const ScalarProgram& program, const Vector& z);
Vector gradient(const ScalarProgram& program, const Vector& z);

// Central differences of the exact reverse-mode gradient, then symmetrized.
// Throws InvalidArgument for k > 64 and NumericalError if the raw estimate is
// asymmetric beyond 1e-6 (relative to its largest entry).
Matrix hessian(const ScalarProgram& program, const Vector& z, double step = 1e-4);

}  // namespace ralab::diff
