#include "ralab/diffgraph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace ralab::diff {
namespace {

double softplus_fn(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid_fn(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

double Unary::value(double x) const {
  switch (kind) {
    case Kind::Relu: return x > 0.0 ? x : 0.0;
    case Kind::LeakyRelu: return x >= 0.0 ? x : param * x;
    case Kind::Softplus: return softplus_fn(x);
    case Kind::Tanh: return std::tanh(x);
    case Kind::Sigmoid: return sigmoid_fn(x);
    case Kind::Square: return x * x;
    case Kind::Log: return std::log(x);
    case Kind::Exp: return std::exp(x);
    case Kind::Activation: return activation.value(x);
    case Kind::InverseActivation: return activation.inverse(x);
    case Kind::LogInverseDerivative: return activation.log_inverse_derivative(x);
  }
  return x;
}

double Unary::derivative(double x) const {
  switch (kind) {
    case Kind::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Kind::LeakyRelu: return x >= 0.0 ? 1.0 : param;
    case Kind::Softplus: return sigmoid_fn(x);
    case Kind::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Kind::Sigmoid: {
      const double s = sigmoid_fn(x);
      return s * (1.0 - s);
    }
    case Kind::Square: return 2.0 * x;
    case Kind::Log: return 1.0 / x;
    case Kind::Exp: return std::exp(x);
    case Kind::Activation: return activation.derivative(x);
    case Kind::InverseActivation: return activation.inverse_derivative(x);
    case Kind::LogInverseDerivative: return activation.log_inverse_derivative_slope(x);
  }
  return 1.0;
}

std::string_view Unary::name() const {
  switch (kind) {
    case Kind::Relu: return "relu";
    case Kind::LeakyRelu: return "leaky_relu";
    case Kind::Softplus: return "softplus";
    case Kind::Tanh: return "tanh";
    case Kind::Sigmoid: return "sigmoid";
    case Kind::Square: return "square";
    case Kind::Log: return "log";
    case Kind::Exp: return "exp";
    case Kind::Activation: return "activation";
    case Kind::InverseActivation: return "inverse_activation";
    case Kind::LogInverseDerivative: return "log_inverse_derivative";
  }
  return "?";
}

std::string_view Tape::op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::MatMul: return "matmul";
    case Op::MatMulNT: return "matmul_nt";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Shift: return "shift";
    case Op::AddRow: return "add_row";
    case Op::SubRow: return "sub_row";
    case Op::AddScalar: return "add_scalar";
    case Op::Unary: return "unary";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::RowSum: return "row_sum";
    case Op::LogSumExpRows: return "log_sum_exp_rows";
    case Op::Reshape: return "reshape";
  }
  return "?";
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw InvalidArgument("diffgraph: invalid variable handle");
  return nodes_[v.id];
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  const std::size_t i = nodes_.size() - 1;
  evaluate(i);
  return Var{i};
}

Var Tape::input(Matrix value) {
  if (!value.allFinite()) throw NonFiniteError("diffgraph: non-finite input leaf");
  Node n{Op::Input};
  n.requires_grad = true;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NonFiniteError("diffgraph: non-finite constant leaf");
  Node n{Op::Constant};
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::set(Var leaf, const Matrix& value) {
  if (leaf.id >= nodes_.size()) throw InvalidArgument("diffgraph: invalid variable handle");
  Node& n = nodes_[leaf.id];
  if (n.op != Op::Input && n.op != Op::Constant) throw InvalidArgument("diffgraph: set() on a non-leaf node");
  if (n.value.rows() != value.rows() || n.value.cols() != value.cols())
    throw ShapeError("diffgraph: leaf shape " + shape_str(n.value) + " cannot take " + shape_str(value));
  if (!value.allFinite()) throw NonFiniteError("diffgraph: non-finite leaf value");
  n.value = value;
}

namespace {
void require_same(const Matrix& a, const Matrix& b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string("diffgraph: ") + std::string(op) + " shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
}
}  // namespace

Var Tape::matmul(Var a, Var b) {
  if (node(a).value.cols() != node(b).value.rows())
    throw ShapeError("diffgraph: matmul shape mismatch " + shape_str(node(a).value) + " * " + shape_str(node(b).value));
  Node n{Op::MatMul, a.id, b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
  if (node(a).value.cols() != node(b).value.cols())
    throw ShapeError("diffgraph: matmul_nt shape mismatch " + shape_str(node(a).value) + " * " +
                     shape_str(node(b).value) + "^T");
  Node n{Op::MatMulNT, a.id, b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require_same(node(a).value, node(b).value, "add");
  Node n{Op::Add, a.id, b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require_same(node(a).value, node(b).value, "sub");
  Node n{Op::Sub, a.id, b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  require_same(node(a).value, node(b).value, "mul");
  Node n{Op::Mul, a.id, b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n{Op::Scale, a.id};
  n.s = s;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Tape::shift(Var a, double s) {
  Node n{Op::Shift, a.id};
  n.s = s;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Tape::add_row(Var m, Var row) {
  if (node(row).value.rows() != 1 || node(row).value.cols() != node(m).value.cols())
    throw ShapeError("diffgraph: add_row expects 1x" + std::to_string(node(m).value.cols()) + ", got " +
                     shape_str(node(row).value));
  Node n{Op::AddRow, m.id, row.id};
  n.requires_grad = node(m).requires_grad || node(row).requires_grad;
  return push(std::move(n));
}

Var Tape::sub_row(Var m, Var row) {
  if (node(row).value.rows() != 1 || node(row).value.cols() != node(m).value.cols())
    throw ShapeError("diffgraph: sub_row expects 1x" + std::to_string(node(m).value.cols()) + ", got " +
                     shape_str(node(row).value));
  Node n{Op::SubRow, m.id, row.id};
  n.requires_grad = node(m).requires_grad || node(row).requires_grad;
  return push(std::move(n));
}

Var Tape::add_scalar(Var m, Var s) {
  if (node(s).value.size() != 1) throw ShapeError("diffgraph: add_scalar expects a 1x1 operand");
  Node n{Op::AddScalar, m.id, s.id};
  n.requires_grad = node(m).requires_grad || node(s).requires_grad;
  return push(std::move(n));
}

Var Tape::unary(Var a, const Unary& u) {
  Node n{Op::Unary, a.id};
  n.u = u;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n{Op::Sum, a.id};
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  if (node(a).value.size() == 0) throw ShapeError("diffgraph: mean of an empty tensor");
  Node n{Op::Mean, a.id};
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Tape::row_sum(Var a) {
  Node n{Op::RowSum, a.id};
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Tape::log_sum_exp_rows(Var a) {
  if (node(a).value.cols() == 0) throw ShapeError("diffgraph: log_sum_exp_rows over zero columns");
  Node n{Op::LogSumExpRows, a.id};
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Tape::reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != node(a).value.size())
    throw ShapeError("diffgraph: cannot reshape " + shape_str(node(a).value) + " to " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  Node n{Op::Reshape, a.id};
  n.rows = rows;
  n.cols = cols;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

void Tape::evaluate(std::size_t i) {
  Node& n = nodes_[i];
  const Matrix& a = nodes_[n.a].value;
  switch (n.op) {
    case Op::Input:
    case Op::Constant:
      return;
    case Op::MatMul:
      n.value.noalias() = a * nodes_[n.b].value;
      break;
    case Op::MatMulNT:
      n.value.noalias() = a * nodes_[n.b].value.transpose();
      break;
    case Op::Add:
      n.value = a + nodes_[n.b].value;
      break;
    case Op::Sub:
      n.value = a - nodes_[n.b].value;
      break;
    case Op::Mul:
      n.value = a.cwiseProduct(nodes_[n.b].value);
      break;
    case Op::Scale:
      n.value = n.s * a;
      break;
    case Op::Shift:
      n.value = a.array() + n.s;
      break;
    case Op::AddRow:
      n.value = a.rowwise() + nodes_[n.b].value.row(0);
      break;
    case Op::SubRow:
      n.value = a.rowwise() - nodes_[n.b].value.row(0);
      break;
    case Op::AddScalar:
      n.value = a.array() + nodes_[n.b].value(0, 0);
      break;
    case Op::Unary: {
      n.value.resize(a.rows(), a.cols());
      const double* src = a.data();
      double* dst = n.value.data();
      for (Eigen::Index k = 0; k < a.size(); ++k) dst[k] = n.u.value(src[k]);
      break;
    }
    case Op::Sum:
      n.value.resize(1, 1);
      n.value(0, 0) = a.sum();
      break;
    case Op::Mean:
      n.value.resize(1, 1);
      n.value(0, 0) = a.mean();
      break;
    case Op::RowSum:
      n.value = a.rowwise().sum();
      break;
    case Op::LogSumExpRows: {
      n.value.resize(a.rows(), 1);
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double m = a.row(r).maxCoeff();
        n.value(r, 0) = m + std::log((a.row(r).array() - m).exp().sum());
      }
      break;
    }
    case Op::Reshape:
      n.value = a.reshaped(n.rows, n.cols);
      break;
  }
  if (!n.value.allFinite()) {
    std::ostringstream msg;
    msg << "diffgraph: non-finite value produced by " << op_name(n.op);
    if (n.op == Op::Unary) msg << "(" << n.u.name() << ")";
    msg << " at node " << i;
    throw NonFiniteError(msg.str());
  }
}

void Tape::forward() {
  for (std::size_t i = 0; i < nodes_.size(); ++i) evaluate(i);
}

void Tape::backward(Var root) {
  const Node& r = node(root);
  if (r.value.size() != 1) throw ShapeError("diffgraph: backward needs a scalar root, got " + shape_str(r.value));
  for (std::size_t i = 0; i <= root.id; ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad) n.adjoint.setZero(n.value.rows(), n.value.cols());
  }
  if (!r.requires_grad) return;
  nodes_[root.id].adjoint(0, 0) = 1.0;

  for (std::size_t idx = root.id + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (!n.requires_grad) continue;
    const Matrix& g = n.adjoint;
    Node& na = nodes_[n.a];
    switch (n.op) {
      case Op::Input:
      case Op::Constant:
        break;
      case Op::MatMul: {
        Node& nb = nodes_[n.b];
        if (na.requires_grad) na.adjoint.noalias() += g * nb.value.transpose();
        if (nb.requires_grad) nb.adjoint.noalias() += na.value.transpose() * g;
        break;
      }
      case Op::MatMulNT: {
        Node& nb = nodes_[n.b];
        if (na.requires_grad) na.adjoint.noalias() += g * nb.value;
        if (nb.requires_grad) nb.adjoint.noalias() += g.transpose() * na.value;
        break;
      }
      case Op::Add: {
        Node& nb = nodes_[n.b];
        if (na.requires_grad) na.adjoint += g;
        if (nb.requires_grad) nb.adjoint += g;
        break;
      }
      case Op::Sub: {
        Node& nb = nodes_[n.b];
        if (na.requires_grad) na.adjoint += g;
        if (nb.requires_grad) nb.adjoint -= g;
        break;
      }
      case Op::Mul: {
        Node& nb = nodes_[n.b];
        if (na.requires_grad) na.adjoint += g.cwiseProduct(nb.value);
        if (nb.requires_grad) nb.adjoint += g.cwiseProduct(na.value);
        break;
      }
      case Op::Scale:
        if (na.requires_grad) na.adjoint += n.s * g;
        break;
      case Op::Shift:
        if (na.requires_grad) na.adjoint += g;
        break;
      case Op::AddRow:
      case Op::SubRow: {
        Node& nb = nodes_[n.b];
        if (na.requires_grad) na.adjoint += g;
        if (nb.requires_grad) {
          if (n.op == Op::AddRow) nb.adjoint += g.colwise().sum();
          else nb.adjoint -= g.colwise().sum();
        }
        break;
      }
      case Op::AddScalar: {
        Node& nb = nodes_[n.b];
        if (na.requires_grad) na.adjoint += g;
        if (nb.requires_grad) nb.adjoint(0, 0) += g.sum();
        break;
      }
      case Op::Unary: {
        if (!na.requires_grad) break;
        const double* src = na.value.data();
        const double* gp = g.data();
        double* dst = na.adjoint.data();
        for (Eigen::Index k = 0; k < na.value.size(); ++k) dst[k] += gp[k] * n.u.derivative(src[k]);
        break;
      }
      case Op::Sum:
        if (na.requires_grad) na.adjoint.array() += g(0, 0);
        break;
      case Op::Mean:
        if (na.requires_grad) na.adjoint.array() += g(0, 0) / static_cast<double>(na.value.size());
        break;
      case Op::RowSum:
        if (na.requires_grad) na.adjoint.colwise() += g.col(0);
        break;
      case Op::LogSumExpRows:
        if (na.requires_grad) {
          for (Eigen::Index row = 0; row < na.value.rows(); ++row) {
            na.adjoint.row(row).array() += g(row, 0) * (na.value.row(row).array() - n.value(row, 0)).exp();
          }
        }
        break;
      case Op::Reshape:
        if (na.requires_grad) na.adjoint += g.reshaped(na.value.rows(), na.value.cols());
        break;
    }
  }
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const Matrix& m = node(v).value;
  if (m.size() != 1) throw ShapeError("diffgraph: scalar() on a " + shape_str(m) + " node");
  return m(0, 0);
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad) throw InvalidArgument("diffgraph: grad() on a node that does not require gradients");
  return n.adjoint;
}

double evaluate(const ScalarProgram& program, const Vector& z) {
  Tape tape;
  const Var leaf = tape.input(z);
  return tape.scalar(program(tape, leaf));
}

Vector gradient(const ScalarProgram& program, const Vector& z) {
  Tape tape;
  const Var leaf = tape.input(z);
  const Var root = program(tape, leaf);
  tape.backward(root);
  return tape.grad(leaf);
}

Matrix hessian(const ScalarProgram& program, const Vector& z, double step) {
  const Eigen::Index k = z.size();
  if (k > 64) throw InvalidArgument("diffgraph: hessian dimension " + std::to_string(k) + " exceeds 64");
  Tape tape;
  const Var leaf = tape.input(z);
  const Var root = program(tape, leaf);
  Matrix h(k, k);
  Vector probe = z;
  for (Eigen::Index j = 0; j < k; ++j) {
    probe(j) = z(j) + step;
    tape.set(leaf, probe);
    tape.forward();
    tape.backward(root);
    const Vector plus = tape.grad(leaf);
    probe(j) = z(j) - step;
    tape.set(leaf, probe);
    tape.forward();
    tape.backward(root);
    h.col(j) = (plus - tape.grad(leaf)) / (2.0 * step);
    probe(j) = z(j);
  }
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-6 * scale)
    throw NumericalError("diffgraph: hessian asymmetry " + std::to_string(asym) + " exceeds tolerance");
  return 0.5 * (h + h.transpose());
}

}  // namespace ralab::diff
