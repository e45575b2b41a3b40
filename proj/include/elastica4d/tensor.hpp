#pragma once

// Reverse-mode automatic differentiation over dense row-batched arrays.
//
// Values are Eigen::MatrixXd with one sample per row. Every primitive is
// evaluated eagerly when recorded, so a Tape is a define-by-run graph whose
// node order is already topological. Elementwise binary primitives broadcast
// an operand of shape 1x1, 1xn or mx1 against an mxn operand.

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace e4d::ad {

using Array = Eigen::MatrixXd;

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMatMul,
  kSum,
  kMean,
  kSoftplus,
  kSigmoid,
  kSin,
  kCos,
  kSqrt,
  kSquare,
  kRelu,
  kNegate,
  kConcat,
  kSlice,
  kCross3,
  kNorm2,
  kNormalize3,
  kRowSum,
  kExp,
  kLog,
  kAcos,
  kAtan2,
  kInterp,
};

std::string_view op_name(Op op);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GradientError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Constants attached to a node. Only the fields relevant to the op are read.
struct Payload {
  Eigen::Index begin = 0;  // kSlice: first column
  Eigen::Index count = 0;  // kSlice: number of columns
  double clamp = 0.0;      // kAcos: input is clamped to [-1 + clamp, 1 - clamp]
  std::shared_ptr<const Array> table;  // kInterp: samples on a uniform grid over [0, 1]
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Array& value() const;
  const Array& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Array value, bool requires_grad = false);
  Var variable(Array value) { return leaf(std::move(value), true); }
  Var constant(double value);

  /// Appends a primitive, evaluates it and returns the new node.
  Var record(Op op, std::span<const Var> inputs, Payload payload = {});
  Var record(Op op, std::initializer_list<Var> inputs, Payload payload = {}) {
    return record(op, std::span<const Var>(inputs.begin(), inputs.size()), std::move(payload));
  }

  const Array& value(Var v) const;
  /// Adjoint from the last backward(); a zero array for nodes it did not reach.
  const Array& grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Seeds d(output)/d(output) = 1 and sweeps the tape in reverse. Adjoints
  /// from any earlier sweep are discarded first.
  void backward(Var output);
  void clear_grads();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::vector<int> inputs;
    Array value;
    Array adjoint;
    Payload payload;
    bool needs_grad = false;
  };

  void check_owner(Var v) const;
  Array& adjoint_of(int id);
  void accumulate(int id, Array contribution);
  void propagate(const Node& node);

  std::vector<Node> nodes_;
  mutable Array zero_;
};

// Primitive builders. All inputs must live on the same tape.
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

Var matmul(Var a, Var b);
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
Var softplus(Var a);
Var sigmoid(Var a);
Var sin(Var a);
Var cos(Var a);
Var sqrt(Var a);
Var square(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var acos(Var a, double clamp = 0.0);
/// Polar angle of (x, y) wrapped to [0, 2*pi).
Var atan2(Var y, Var x);
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice(Var a, Eigen::Index begin, Eigen::Index count);
Var cross3(Var a, Var b);
Var norm2(Var a);
Var normalize3(Var a);
/// Piecewise-linear lookup of the rows of `table` (uniform samples over
/// [0, 1]) at the positions in the column `x`; positions are clamped to [0, 1].
Var interp(Var x, std::shared_ptr<const Array> table);

}  // namespace e4d::ad
