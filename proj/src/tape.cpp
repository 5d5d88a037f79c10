#include "dlrs/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dlrs/error.hpp"

namespace dlrs::ad {

std::string_view to_string(Op op) noexcept {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConstant: return "constant";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kPow: return "pow";
  }
  return "?";
}

double Var::value() const {
  if (!tape_) throw std::logic_error("value() on an unbound Var");
  return tape_->value(index_);
}

Var Tape::push(Op op, std::uint32_t a, std::uint32_t b, double value, double aux) {
  if (!std::isfinite(value)) {
    throw NonFiniteError("tape: " + std::string(to_string(op)) + " produced a non-finite value at node " +
                         std::to_string(nodes_.size()));
  }
  nodes_.push_back(Node{op, a, b, value, aux});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::check_owner(Var v) const {
  if (v.tape_ != this || v.index_ >= nodes_.size()) {
    throw std::invalid_argument("operand is not a node of this tape");
  }
}

Var Tape::variable(double value) {
  const auto ordinal = static_cast<double>(leaves_.size());
  Var v = push(Op::kLeaf, 0, 0, value, ordinal);
  leaves_.push_back(v.index_);
  return v;
}

Var Tape::constant(double value) { return push(Op::kConstant, 0, 0, value, 0.0); }

Var Tape::apply(Op op, Var a) {
  check_owner(a);
  const double x = nodes_[a.index_].value;
  double y = 0.0;
  switch (op) {
    case Op::kNeg: y = -x; break;
    case Op::kSin: y = std::sin(x); break;
    case Op::kCos: y = std::cos(x); break;
    case Op::kTanh: y = std::tanh(x); break;
    case Op::kExp: y = std::exp(x); break;
    case Op::kLog: y = std::log(x); break;
    default: throw std::invalid_argument("not a unary op: " + std::string(to_string(op)));
  }
  return push(op, a.index_, 0, y, 0.0);
}

Var Tape::apply(Op op, Var a, Var b) {
  check_owner(a);
  check_owner(b);
  const double x = nodes_[a.index_].value;
  const double z = nodes_[b.index_].value;
  double y = 0.0;
  switch (op) {
    case Op::kAdd: y = x + z; break;
    case Op::kSub: y = x - z; break;
    case Op::kMul: y = x * z; break;
    case Op::kDiv: y = x / z; break;
    default: throw std::invalid_argument("not a binary op: " + std::string(to_string(op)));
  }
  return push(op, a.index_, b.index_, y, 0.0);
}

Var Tape::pow(Var a, double exponent) {
  check_owner(a);
  return push(Op::kPow, a.index_, 0, std::pow(nodes_[a.index_].value, exponent), exponent);
}

std::vector<double> Tape::gradient(Var root) const {
  if (root.tape_ != this || root.index_ >= nodes_.size()) {
    throw std::invalid_argument("gradient root is not a scalar node of this tape");
  }
  std::vector<double> adj(root.index_ + 1, 0.0);
  adj[root.index_] = 1.0;

  for (std::size_t i = root.index_ + 1; i-- > 0;) {
    const double g = adj[i];
    if (g == 0.0) continue;
    const Node& n = nodes_[i];
    const double x = n.op == Op::kLeaf || n.op == Op::kConstant ? 0.0 : nodes_[n.a].value;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConstant: break;
      case Op::kAdd:
        adj[n.a] += g;
        adj[n.b] += g;
        break;
      case Op::kSub:
        adj[n.a] += g;
        adj[n.b] -= g;
        break;
      case Op::kMul:
        adj[n.a] += g * nodes_[n.b].value;
        adj[n.b] += g * x;
        break;
      case Op::kDiv: {
        const double z = nodes_[n.b].value;
        adj[n.a] += g / z;
        adj[n.b] -= g * n.value / z;
        break;
      }
      case Op::kNeg: adj[n.a] -= g; break;
      case Op::kSin: adj[n.a] += g * std::cos(x); break;
      case Op::kCos: adj[n.a] -= g * std::sin(x); break;
      case Op::kTanh: adj[n.a] += g * (1.0 - n.value * n.value); break;
      case Op::kExp: adj[n.a] += g * n.value; break;
      case Op::kLog: adj[n.a] += g / x; break;
      case Op::kPow: adj[n.a] += g * n.aux * std::pow(x, n.aux - 1.0); break;
    }
  }

  std::vector<double> grad(leaves_.size(), 0.0);
  for (std::size_t k = 0; k < leaves_.size(); ++k) {
    if (leaves_[k] <= root.index_) grad[k] = adj[leaves_[k]];
  }
  return grad;
}

namespace {

Tape& owner(Var a) {
  if (!a.tape()) throw std::logic_error("arithmetic on an unbound Var");
  return *a.tape();
}

Tape& owner(Var a, Var b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("operands live on different tapes");
  return owner(a);
}

}  // namespace

Var operator+(Var a, Var b) { return owner(a, b).apply(Op::kAdd, a, b); }
Var operator-(Var a, Var b) { return owner(a, b).apply(Op::kSub, a, b); }
Var operator*(Var a, Var b) { return owner(a, b).apply(Op::kMul, a, b); }
Var operator/(Var a, Var b) { return owner(a, b).apply(Op::kDiv, a, b); }
Var operator-(Var a) { return owner(a).apply(Op::kNeg, a); }

Var operator+(Var a, double b) { return a + owner(a).constant(b); }
Var operator+(double a, Var b) { return owner(b).constant(a) + b; }
Var operator-(Var a, double b) { return a - owner(a).constant(b); }
Var operator-(double a, Var b) { return owner(b).constant(a) - b; }
Var operator*(Var a, double b) { return a * owner(a).constant(b); }
Var operator*(double a, Var b) { return owner(b).constant(a) * b; }
Var operator/(Var a, double b) { return a / owner(a).constant(b); }
Var operator/(double a, Var b) { return owner(b).constant(a) / b; }

Var& operator+=(Var& a, Var b) {
  a = a + b;
  return a;
}

Var sin(Var a) { return owner(a).apply(Op::kSin, a); }
Var cos(Var a) { return owner(a).apply(Op::kCos, a); }
Var tanh(Var a) { return owner(a).apply(Op::kTanh, a); }
Var exp(Var a) { return owner(a).apply(Op::kExp, a); }
Var log(Var a) { return owner(a).apply(Op::kLog, a); }
Var pow(Var a, double exponent) { return owner(a).pow(a, exponent); }

}  // namespace dlrs::ad
