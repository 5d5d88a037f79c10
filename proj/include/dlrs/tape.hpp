#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace dlrs::ad {

enum class Op : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kSin,
  kCos,
  kTanh,
  kExp,
  kLog,
  kPow,
};

std::string_view to_string(Op op) noexcept;

class Tape;

/// Handle to one scalar node on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  double value() const;
  std::uint32_t index() const noexcept { return index_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

/// Reverse-mode recording of scalar primitives.
///
/// Nodes are appended in evaluation order, so operands always precede the
/// node that uses them and one backward sweep from the root visits every
/// node once. Every primitive checks its result; a NaN or Inf throws
/// NonFiniteError tagged with the operation and node index.
class Tape {
 public:
  struct Node {
    Op op;
    std::uint32_t a;
    std::uint32_t b;
    double value;
    double aux;  // exponent for kPow, leaf ordinal for kLeaf
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A differentiable leaf (a parameter). Leaves are numbered in creation order.
  Var variable(double value);
  Var constant(double value);

  Var apply(Op op, Var a);
  Var apply(Op op, Var a, Var b);
  Var pow(Var a, double exponent);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t leaf_count() const noexcept { return leaves_.size(); }
  const Node& node(std::uint32_t index) const { return nodes_.at(index); }
  double value(std::uint32_t index) const { return nodes_.at(index).value; }

  /// d(root)/d(leaf) for every leaf, in leaf order. Leaves that do not feed
  /// the root get exactly 0. Throws std::invalid_argument when `root` is not a
  /// node of this tape.
  std::vector<double> gradient(Var root) const;

  void clear() noexcept {
    nodes_.clear();
    leaves_.clear();
  }

 private:
  Var push(Op op, std::uint32_t a, std::uint32_t b, double value, double aux);
  void check_owner(Var v) const;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> leaves_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);

Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);

Var& operator+=(Var& a, Var b);

Var sin(Var a);
Var cos(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var pow(Var a, double exponent);

inline double primal(double x) noexcept { return x; }
inline double primal(Var x) { return x.value(); }

}  // namespace dlrs::ad
