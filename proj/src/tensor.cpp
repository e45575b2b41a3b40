#include "elastica4d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace e4d::ad {

namespace {

#if defined(__GLIBC__)
// Tape buffers are large and short-lived. Keeping them on the heap instead of
// mmap-ing fresh pages for every node avoids page-fault churn between steps.
[[maybe_unused]] const bool kMallocTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

std::string shape_str(const Array& a) {
  std::ostringstream os;
  os << a.rows() << "x" << a.cols();
  return os.str();
}

[[noreturn]] void shape_error(Op op, std::initializer_list<const Array*> shapes,
                              std::string_view detail = {}) {
  std::ostringstream os;
  os << "shape mismatch in '" << op_name(op) << "':";
  for (const Array* a : shapes) os << " " << shape_str(*a);
  if (!detail.empty()) os << " (" << detail << ")";
  throw ShapeError(os.str());
}

bool compatible_dim(Eigen::Index a, Eigen::Index b) { return a == b || a == 1 || b == 1; }

// Broadcasts a 1x1, 1xc or rx1 operand to r x c with vectorized fills.
Array expand(const Array& a, Eigen::Index r, Eigen::Index c) {
  Array out(r, c);
  if (a.rows() == 1) {
    for (Eigen::Index j = 0; j < c; ++j) out.col(j).setConstant(a(0, a.cols() == 1 ? 0 : j));
  } else {
    for (Eigen::Index j = 0; j < c; ++j) out.col(j) = a.col(0);
  }
  return out;
}

// Calls f on both operands broadcast to r x c, expanding only the ones that need it.
template <class F>
Array with_broadcast(const Array& a, const Array& b, Eigen::Index r, Eigen::Index c, F&& f) {
  const bool full_a = a.rows() == r && a.cols() == c;
  const bool full_b = b.rows() == r && b.cols() == c;
  if (full_a && full_b) return f(a, b);
  if (full_a) return f(a, expand(b, r, c));
  if (full_b) return f(expand(a, r, c), b);
  return f(expand(a, r, c), expand(b, r, c));
}

// Sums a broadcast adjoint back down to the operand's shape.
Array reduce_to(const Array& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Array::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

Array softplus_of(const Array& x) {
  return (x.array().max(0.0) + (1.0 + (-x.array().abs()).exp()).log()).matrix();
}

// exp(-x) overflowing to inf still yields the correct limit 0.
Array sigmoid_of(const Array& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

Array row_cross(const Array& a, const Array& b) {
  Array out(a.rows(), 3);
  out.col(0) = a.col(1).cwiseProduct(b.col(2)) - a.col(2).cwiseProduct(b.col(1));
  out.col(1) = a.col(2).cwiseProduct(b.col(0)) - a.col(0).cwiseProduct(b.col(2));
  out.col(2) = a.col(0).cwiseProduct(b.col(1)) - a.col(1).cwiseProduct(b.col(0));
  return out;
}

Eigen::VectorXd safe_inverse(const Eigen::VectorXd& norms) {
  return norms.unaryExpr([](double n) { return n > 0.0 ? 1.0 / n : 0.0; });
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kMatMul: return "matmul";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSoftplus: return "softplus";
    case Op::kSigmoid: return "sigmoid";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kSqrt: return "sqrt";
    case Op::kSquare: return "square";
    case Op::kRelu: return "max-with-zero";
    case Op::kNegate: return "negate";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kCross3: return "cross3";
    case Op::kNorm2: return "norm2";
    case Op::kNormalize3: return "normalize3";
    case Op::kRowSum: return "row_sum";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kAcos: return "acos";
    case Op::kAtan2: return "atan2";
    case Op::kInterp: return "interp";
  }
  return "unknown";
}

const Array& Var::value() const { return tape_->value(*this); }
const Array& Var::grad() const { return tape_->grad(*this); }

double Var::scalar() const {
  const Array& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on a " + shape_str(v) + " value");
  return v(0, 0);
}

void Tape::check_owner(Var v) const {
  if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw std::invalid_argument("variable does not belong to this tape");
  }
}

Var Tape::leaf(Array value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(double value) { return leaf(Array::Constant(1, 1, value), false); }

const Array& Tape::value(Var v) const {
  check_owner(v);
  return nodes_[v.id_].value;
}

const Array& Tape::grad(Var v) const {
  check_owner(v);
  const Node& node = nodes_[v.id_];
  if (node.adjoint.size() == node.value.size() && node.adjoint.size() > 0) return node.adjoint;
  zero_ = Array::Zero(node.value.rows(), node.value.cols());
  return zero_;
}

bool Tape::requires_grad(Var v) const {
  check_owner(v);
  return nodes_[v.id_].needs_grad;
}

Var Tape::record(Op op, std::span<const Var> inputs, Payload payload) {
  for (const Var& v : inputs) check_owner(v);
  auto in = [&](std::size_t k) -> const Array& { return nodes_[inputs[k].id_].value; };
  auto expect_arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw std::invalid_argument(std::string(op_name(op)) + ": expected " + std::to_string(n) +
                                  " inputs, got " + std::to_string(inputs.size()));
    }
  };

  Array out;
  switch (op) {
    case Op::kLeaf:
      throw std::invalid_argument("record: use Tape::leaf for leaves");
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      expect_arity(2);
      const Array& a = in(0);
      const Array& b = in(1);
      if (!compatible_dim(a.rows(), b.rows()) || !compatible_dim(a.cols(), b.cols())) {
        shape_error(op, {&a, &b});
      }
      const Eigen::Index r = std::max(a.rows(), b.rows());
      const Eigen::Index c = std::max(a.cols(), b.cols());
      out = with_broadcast(a, b, r, c, [op](const Array& x, const Array& y) -> Array {
        if (op == Op::kAdd) return x + y;
        if (op == Op::kSub) return x - y;
        if (op == Op::kMul) return x.cwiseProduct(y);
        return x.cwiseQuotient(y);
      });
      break;
    }
    case Op::kMatMul:
      expect_arity(2);
      if (in(0).cols() != in(1).rows()) shape_error(op, {&in(0), &in(1)});
      out.noalias() = in(0) * in(1);
      break;
    case Op::kSum:
      expect_arity(1);
      out = Array::Constant(1, 1, in(0).sum());
      break;
    case Op::kMean:
      expect_arity(1);
      if (in(0).size() == 0) shape_error(op, {&in(0)}, "empty input");
      out = Array::Constant(1, 1, in(0).mean());
      break;
    case Op::kRowSum:
      expect_arity(1);
      out = in(0).rowwise().sum();
      break;
    case Op::kSoftplus:
      expect_arity(1);
      out = softplus_of(in(0));
      break;
    case Op::kSigmoid:
      expect_arity(1);
      out = sigmoid_of(in(0));
      break;
    case Op::kSin:
      expect_arity(1);
      out = in(0).array().sin().matrix();
      break;
    case Op::kCos:
      expect_arity(1);
      out = in(0).array().cos().matrix();
      break;
    case Op::kSqrt:
      expect_arity(1);
      out = in(0).array().sqrt().matrix();
      break;
    case Op::kSquare:
      expect_arity(1);
      out = in(0).array().square().matrix();
      break;
    case Op::kRelu:
      expect_arity(1);
      out = in(0).cwiseMax(0.0);
      break;
    case Op::kNegate:
      expect_arity(1);
      out = -in(0);
      break;
    case Op::kExp:
      expect_arity(1);
      out = in(0).array().exp().matrix();
      break;
    case Op::kLog:
      expect_arity(1);
      out = in(0).array().log().matrix();
      break;
    case Op::kAcos: {
      expect_arity(1);
      const double hi = 1.0 - payload.clamp;
      out = in(0).unaryExpr([hi](double x) { return std::acos(std::clamp(x, -hi, hi)); });
      break;
    }
    case Op::kAtan2: {
      expect_arity(2);
      const Array& y = in(0);
      const Array& x = in(1);
      if (y.rows() != x.rows() || y.cols() != x.cols()) shape_error(op, {&y, &x});
      out = Array(y.rows(), y.cols());
      for (Eigen::Index k = 0; k < y.size(); ++k) {
        double a = std::atan2(y.data()[k], x.data()[k]);
        if (a < 0.0) a += 2.0 * std::numbers::pi;
        if (a >= 2.0 * std::numbers::pi) a = 0.0;
        out.data()[k] = a;
      }
      break;
    }
    case Op::kConcat: {
      if (inputs.empty()) throw std::invalid_argument("concat: no inputs");
      Eigen::Index cols = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (in(k).rows() != in(0).rows()) shape_error(op, {&in(0), &in(k)});
        cols += in(k).cols();
      }
      out = Array(in(0).rows(), cols);
      Eigen::Index offset = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        out.middleCols(offset, in(k).cols()) = in(k);
        offset += in(k).cols();
      }
      break;
    }
    case Op::kSlice:
      expect_arity(1);
      if (payload.begin < 0 || payload.count < 0 || payload.begin + payload.count > in(0).cols()) {
        shape_error(op, {&in(0)}, "column range out of bounds");
      }
      out = in(0).middleCols(payload.begin, payload.count);
      break;
    case Op::kCross3:
      expect_arity(2);
      if (in(0).cols() != 3 || in(1).cols() != 3 || in(0).rows() != in(1).rows()) {
        shape_error(op, {&in(0), &in(1)});
      }
      out = row_cross(in(0), in(1));
      break;
    case Op::kNorm2:
      expect_arity(1);
      out = in(0).rowwise().norm();
      break;
    case Op::kNormalize3: {
      expect_arity(1);
      const Eigen::VectorXd inv = safe_inverse(in(0).rowwise().norm());
      out = inv.asDiagonal() * in(0);
      break;
    }
    case Op::kInterp: {
      expect_arity(1);
      if (!payload.table || payload.table->rows() < 2) {
        throw std::invalid_argument("interp: table needs at least two samples");
      }
      if (in(0).cols() != 1) shape_error(op, {&in(0)}, "positions must be a column");
      const Array& table = *payload.table;
      const Eigen::Index m = table.rows();
      out = Array(in(0).rows(), table.cols());
      for (Eigen::Index r = 0; r < in(0).rows(); ++r) {
        const double p = std::clamp(in(0)(r, 0), 0.0, 1.0) * static_cast<double>(m - 1);
        const Eigen::Index i = std::min<Eigen::Index>(static_cast<Eigen::Index>(p), m - 2);
        const double f = p - static_cast<double>(i);
        out.row(r) = (1.0 - f) * table.row(i) + f * table.row(i + 1);
      }
      break;
    }
  }

  Node node;
  node.op = op;
  node.value = std::move(out);
  node.payload = std::move(payload);
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    node.inputs.push_back(v.id_);
    node.needs_grad = node.needs_grad || nodes_[v.id_].needs_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::clear_grads() {
  for (Node& n : nodes_) n.adjoint.resize(0, 0);
}

Array& Tape::adjoint_of(int id) {
  Node& n = nodes_[id];
  if (n.adjoint.size() != n.value.size() || n.adjoint.size() == 0) {
    n.adjoint = Array::Zero(n.value.rows(), n.value.cols());
  }
  return n.adjoint;
}

void Tape::accumulate(int id, Array contribution) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.adjoint.size() == 0) {
    n.adjoint = std::move(contribution);
  } else {
    n.adjoint += contribution;
  }
}

void Tape::backward(Var output) {
  check_owner(output);
  if (nodes_[output.id_].value.size() != 1) {
    throw GradientError("backward: output must be scalar, got " +
                        shape_str(nodes_[output.id_].value));
  }
  clear_grads();
  if (!nodes_[output.id_].needs_grad) return;
  adjoint_of(output.id_).setConstant(1.0);
  for (int id = output.id_; id >= 0; --id) {
    const Node& node = nodes_[id];
    if (node.op == Op::kLeaf || !node.needs_grad || node.adjoint.size() == 0) continue;
    propagate(node);
  }
}

void Tape::propagate(const Node& node) {
  const Array& g = node.adjoint;
  auto val = [&](std::size_t k) -> const Array& { return nodes_[node.inputs[k]].value; };
  auto wants = [&](std::size_t k) { return nodes_[node.inputs[k]].needs_grad; };
  const int a = node.inputs.empty() ? -1 : node.inputs[0];

  switch (node.op) {
    case Op::kLeaf:
      break;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      const Array& x = val(0);
      const Array& y = val(1);
      const Eigen::Index r = g.rows();
      const Eigen::Index c = g.cols();
      const int b = node.inputs[1];
      if (node.op == Op::kAdd) {
        if (wants(0)) accumulate(a, reduce_to(g, x.rows(), x.cols()));
        if (wants(1)) accumulate(b, reduce_to(g, y.rows(), y.cols()));
      } else if (node.op == Op::kSub) {
        if (wants(0)) accumulate(a, reduce_to(g, x.rows(), x.cols()));
        if (wants(1)) accumulate(b, reduce_to(-g, y.rows(), y.cols()));
      } else if (node.op == Op::kMul) {
        auto times = [](const Array& p, const Array& q) -> Array { return p.cwiseProduct(q); };
        if (wants(0)) accumulate(a, reduce_to(with_broadcast(g, y, r, c, times), x.rows(), x.cols()));
        if (wants(1)) accumulate(b, reduce_to(with_broadcast(g, x, r, c, times), y.rows(), y.cols()));
      } else {
        auto over = [](const Array& p, const Array& q) -> Array { return p.cwiseQuotient(q); };
        if (wants(0)) accumulate(a, reduce_to(with_broadcast(g, y, r, c, over), x.rows(), x.cols()));
        if (wants(1)) {
          const Array gv = -g.cwiseProduct(node.value);
          accumulate(b, reduce_to(with_broadcast(gv, y, r, c, over), y.rows(), y.cols()));
        }
      }
      break;
    }
    case Op::kMatMul: {
      if (wants(0)) {
        Array d;
        d.noalias() = g * val(1).transpose();
        accumulate(a, d);
      }
      if (wants(1)) {
        Array d;
        d.noalias() = val(0).transpose() * g;
        accumulate(node.inputs[1], d);
      }
      break;
    }
    case Op::kSum:
      accumulate(a, Array::Constant(val(0).rows(), val(0).cols(), g(0, 0)));
      break;
    case Op::kMean:
      accumulate(a, Array::Constant(val(0).rows(), val(0).cols(),
                                    g(0, 0) / static_cast<double>(val(0).size())));
      break;
    case Op::kRowSum:
      accumulate(a, g.replicate(1, val(0).cols()));
      break;
    case Op::kSoftplus:
      accumulate(a, g.cwiseProduct(sigmoid_of(val(0))));
      break;
    case Op::kSigmoid: {
      const Array& s = node.value;
      accumulate(a, g.array() * s.array() * (1.0 - s.array()));
      break;
    }
    case Op::kSin:
      accumulate(a, g.array() * val(0).array().cos());
      break;
    case Op::kCos:
      accumulate(a, -(g.array() * val(0).array().sin()));
      break;
    case Op::kSqrt:
      accumulate(a, 0.5 * g.array() / node.value.array());
      break;
    case Op::kSquare:
      accumulate(a, 2.0 * g.array() * val(0).array());
      break;
    case Op::kRelu:
      // Subgradient at exactly zero is zero.
      accumulate(a, g.array() * (val(0).array() > 0.0).cast<double>());
      break;
    case Op::kNegate:
      accumulate(a, -g);
      break;
    case Op::kExp:
      accumulate(a, g.cwiseProduct(node.value));
      break;
    case Op::kLog:
      accumulate(a, g.cwiseQuotient(val(0)));
      break;
    case Op::kAcos: {
      const double hi = 1.0 - node.payload.clamp;
      const Array d = val(0).unaryExpr([hi](double x) {
        const double c = std::clamp(x, -hi, hi);
        return -1.0 / std::sqrt(std::max(1.0 - c * c, 1e-30));
      });
      accumulate(a, g.cwiseProduct(d));
      break;
    }
    case Op::kAtan2: {
      const Array& y = val(0);
      const Array& x = val(1);
      const Array r2 = (x.array().square() + y.array().square()).max(1e-300).matrix();
      if (wants(0)) accumulate(a, g.array() * x.array() / r2.array());
      if (wants(1)) accumulate(node.inputs[1], -(g.array() * y.array() / r2.array()));
      break;
    }
    case Op::kConcat: {
      Eigen::Index offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const Eigen::Index c = val(k).cols();
        if (wants(k)) accumulate(node.inputs[k], g.middleCols(offset, c));
        offset += c;
      }
      break;
    }
    case Op::kSlice: {
      Array d = Array::Zero(val(0).rows(), val(0).cols());
      d.middleCols(node.payload.begin, node.payload.count) = g;
      accumulate(a, d);
      break;
    }
    case Op::kCross3:
      // (x cross y) . g = x . (y cross g) = y . (g cross x)
      if (wants(0)) accumulate(a, row_cross(val(1), g));
      if (wants(1)) accumulate(node.inputs[1], row_cross(g, val(0)));
      break;
    case Op::kNorm2: {
      const Eigen::VectorXd inv = safe_inverse(node.value.col(0));
      accumulate(a, (inv.cwiseProduct(g.col(0))).asDiagonal() * val(0));
      break;
    }
    case Op::kNormalize3: {
      const Array& n = node.value;
      const Eigen::VectorXd inv = safe_inverse(val(0).rowwise().norm());
      const Eigen::VectorXd dot = n.cwiseProduct(g).rowwise().sum();
      accumulate(a, inv.asDiagonal() * (g - dot.asDiagonal() * n));
      break;
    }
    case Op::kInterp: {
      const Array& table = *node.payload.table;
      const Eigen::Index m = table.rows();
      const double scale = static_cast<double>(m - 1);
      Array d(val(0).rows(), 1);
      for (Eigen::Index r = 0; r < d.rows(); ++r) {
        const double x = val(0)(r, 0);
        if (x < 0.0 || x > 1.0) {
          d(r, 0) = 0.0;
          continue;
        }
        const double p = x * scale;
        const Eigen::Index i = std::min<Eigen::Index>(static_cast<Eigen::Index>(p), m - 2);
        d(r, 0) = scale * (table.row(i + 1) - table.row(i)).dot(g.row(r));
      }
      accumulate(a, d);
      break;
    }
  }
}

namespace {

Var binary(Op op, Var a, Var b) { return a.tape()->record(op, {a, b}); }
Var unary(Op op, Var a) { return a.tape()->record(op, {a}); }

}  // namespace

Var operator+(Var a, Var b) { return binary(Op::kAdd, a, b); }
Var operator-(Var a, Var b) { return binary(Op::kSub, a, b); }
Var operator*(Var a, Var b) { return binary(Op::kMul, a, b); }
Var operator/(Var a, Var b) { return binary(Op::kDiv, a, b); }
Var operator-(Var a) { return unary(Op::kNegate, a); }
Var operator+(Var a, double b) { return a + a.tape()->constant(b); }
Var operator+(double a, Var b) { return b.tape()->constant(a) + b; }
Var operator-(Var a, double b) { return a - a.tape()->constant(b); }
Var operator-(double a, Var b) { return b.tape()->constant(a) - b; }
Var operator*(Var a, double b) { return a * a.tape()->constant(b); }
Var operator*(double a, Var b) { return b.tape()->constant(a) * b; }
Var operator/(Var a, double b) { return a * a.tape()->constant(1.0 / b); }
Var operator/(double a, Var b) { return b.tape()->constant(a) / b; }

Var matmul(Var a, Var b) { return binary(Op::kMatMul, a, b); }
Var sum(Var a) { return unary(Op::kSum, a); }
Var mean(Var a) { return unary(Op::kMean, a); }
Var row_sum(Var a) { return unary(Op::kRowSum, a); }
Var softplus(Var a) { return unary(Op::kSoftplus, a); }
Var sigmoid(Var a) { return unary(Op::kSigmoid, a); }
Var sin(Var a) { return unary(Op::kSin, a); }
Var cos(Var a) { return unary(Op::kCos, a); }
Var sqrt(Var a) { return unary(Op::kSqrt, a); }
Var square(Var a) { return unary(Op::kSquare, a); }
Var relu(Var a) { return unary(Op::kRelu, a); }
Var exp(Var a) { return unary(Op::kExp, a); }
Var log(Var a) { return unary(Op::kLog, a); }

Var acos(Var a, double clamp) {
  Payload p;
  p.clamp = clamp;
  return a.tape()->record(Op::kAcos, {a}, std::move(p));
}

Var atan2(Var y, Var x) { return binary(Op::kAtan2, y, x); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  return parts.front().tape()->record(Op::kConcat, parts);
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice(Var a, Eigen::Index begin, Eigen::Index count) {
  Payload p;
  p.begin = begin;
  p.count = count;
  return a.tape()->record(Op::kSlice, {a}, std::move(p));
}

Var cross3(Var a, Var b) { return binary(Op::kCross3, a, b); }
Var norm2(Var a) { return unary(Op::kNorm2, a); }
Var normalize3(Var a) { return unary(Op::kNormalize3, a); }

Var interp(Var x, std::shared_ptr<const Array> table) {
  Payload p;
  p.table = std::move(table);
  return x.tape()->record(Op::kInterp, {x}, std::move(p));
}

}  // namespace e4d::ad
