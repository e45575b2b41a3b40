#include "elastica4d/jet.hpp"

#include <stdexcept>

namespace e4d::ad {

namespace {

std::size_t common_directions(const Jet& a, const Jet& b) {
  if (a.is_constant()) return b.directions();
  if (b.is_constant()) return a.directions();
  if (a.directions() != b.directions()) {
    throw std::invalid_argument("jet: operands carry different tangent counts");
  }
  return a.directions();
}

Var zeros_like(Var v) { return v.tape()->leaf(Array::Zero(v.rows(), v.cols())); }

template <class F>
Jet map_tangents(Var value, const Jet& a, F&& f) {
  Jet out(value);
  out.tangents.reserve(a.directions());
  for (const Var& d : a.tangents) out.tangents.push_back(f(d));
  return out;
}

}  // namespace

Jet seed(Var value, std::size_t which, std::size_t count) {
  if (which >= count) throw std::invalid_argument("jet seed direction out of range");
  Tape& tape = *value.tape();
  Jet out(value);
  for (std::size_t k = 0; k < count; ++k) {
    const double s = k == which ? 1.0 : 0.0;
    out.tangents.push_back(tape.leaf(Array::Constant(value.rows(), value.cols(), s)));
  }
  return out;
}

Jet operator+(const Jet& a, const Jet& b) {
  const std::size_t n = common_directions(a, b);
  Jet out(a.value + b.value);
  for (std::size_t k = 0; k < n; ++k) {
    if (a.is_constant()) out.tangents.push_back(b.tangents[k]);
    else if (b.is_constant()) out.tangents.push_back(a.tangents[k]);
    else out.tangents.push_back(a.tangents[k] + b.tangents[k]);
  }
  return out;
}

Jet operator-(const Jet& a) {
  return map_tangents(-a.value, a, [](Var d) { return -d; });
}

Jet operator-(const Jet& a, const Jet& b) {
  const std::size_t n = common_directions(a, b);
  Jet out(a.value - b.value);
  for (std::size_t k = 0; k < n; ++k) {
    if (a.is_constant()) out.tangents.push_back(-b.tangents[k]);
    else if (b.is_constant()) out.tangents.push_back(a.tangents[k]);
    else out.tangents.push_back(a.tangents[k] - b.tangents[k]);
  }
  return out;
}

Jet operator*(const Jet& a, const Jet& b) {
  const std::size_t n = common_directions(a, b);
  Jet out(a.value * b.value);
  for (std::size_t k = 0; k < n; ++k) {
    if (a.is_constant()) out.tangents.push_back(a.value * b.tangents[k]);
    else if (b.is_constant()) out.tangents.push_back(a.tangents[k] * b.value);
    else out.tangents.push_back(a.tangents[k] * b.value + a.value * b.tangents[k]);
  }
  return out;
}

Jet operator/(const Jet& a, const Jet& b) {
  const std::size_t n = common_directions(a, b);
  const Var q = a.value / b.value;
  Jet out(q);
  for (std::size_t k = 0; k < n; ++k) {
    if (a.is_constant()) out.tangents.push_back(-(q * b.tangents[k]) / b.value);
    else if (b.is_constant()) out.tangents.push_back(a.tangents[k] / b.value);
    else out.tangents.push_back((a.tangents[k] - q * b.tangents[k]) / b.value);
  }
  return out;
}

Jet operator+(const Jet& a, double b) { return Jet(a.value + b, a.tangents); }
Jet operator+(double a, const Jet& b) { return b + a; }
Jet operator-(const Jet& a, double b) { return Jet(a.value - b, a.tangents); }
Jet operator-(double a, const Jet& b) { return -b + a; }

Jet operator*(const Jet& a, double b) {
  const Var c = a.tape().constant(b);
  return map_tangents(a.value * c, a, [&](Var d) { return d * c; });
}

Jet operator*(double a, const Jet& b) { return b * a; }
Jet operator/(const Jet& a, double b) { return a * (1.0 / b); }

Jet operator/(double a, const Jet& b) {
  const Var q = a / b.value;
  const Var slope = -(q / b.value);
  return map_tangents(q, b, [&](Var d) { return slope * d; });
}

Jet sin(const Jet& a) {
  if (a.is_constant()) return Jet(sin(a.value));
  const Var c = cos(a.value);
  return map_tangents(sin(a.value), a, [&](Var d) { return c * d; });
}

Jet cos(const Jet& a) {
  if (a.is_constant()) return Jet(cos(a.value));
  const Var s = -sin(a.value);
  return map_tangents(cos(a.value), a, [&](Var d) { return s * d; });
}

Jet exp(const Jet& a) {
  const Var e = exp(a.value);
  return map_tangents(e, a, [&](Var d) { return e * d; });
}

Jet sqrt(const Jet& a) {
  const Var s = sqrt(a.value);
  if (a.is_constant()) return Jet(s);
  const Var half_inv = 0.5 / s;
  return map_tangents(s, a, [&](Var d) { return half_inv * d; });
}

Jet square(const Jet& a) {
  if (a.is_constant()) return Jet(square(a.value));
  const Var twice = 2.0 * a.value;
  return map_tangents(square(a.value), a, [&](Var d) { return twice * d; });
}

Jet softplus(const Jet& a) {
  if (a.is_constant()) return Jet(softplus(a.value));
  const Var s = sigmoid(a.value);
  return map_tangents(softplus(a.value), a, [&](Var d) { return s * d; });
}

Jet sigmoid(const Jet& a) {
  const Var s = sigmoid(a.value);
  if (a.is_constant()) return Jet(s);
  const Var slope = s * (1.0 - s);
  return map_tangents(s, a, [&](Var d) { return slope * d; });
}

Jet acos(const Jet& a, double clamp) {
  const Var angle = acos(a.value, clamp);
  if (a.is_constant()) return Jet(angle);
  // d acos(x) = -dx / sin(acos(x)); the clamp keeps sin(angle) > 0.
  const Var factor = -1.0 / sin(angle);
  return map_tangents(angle, a, [&](Var d) { return factor * d; });
}

Jet atan2(const Jet& y, const Jet& x) {
  const std::size_t n = common_directions(y, x);
  Jet out(atan2(y.value, x.value));
  if (n == 0) return out;
  const Var r2 = square(x.value) + square(y.value);
  const Var ax = x.value / r2;
  const Var ay = y.value / r2;
  for (std::size_t k = 0; k < n; ++k) {
    if (x.is_constant()) out.tangents.push_back(ax * y.tangents[k]);
    else if (y.is_constant()) out.tangents.push_back(-(ay * x.tangents[k]));
    else out.tangents.push_back(ax * y.tangents[k] - ay * x.tangents[k]);
  }
  return out;
}

Jet matmul(const Jet& a, Var b) {
  return map_tangents(matmul(a.value, b), a, [&](Var d) { return matmul(d, b); });
}

Jet concat(std::span<const Jet> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::size_t n = 0;
  for (const Jet& p : parts) {
    if (p.is_constant()) continue;
    if (n != 0 && n != p.directions()) {
      throw std::invalid_argument("jet concat: parts carry different tangent counts");
    }
    n = p.directions();
  }
  std::vector<Var> values;
  values.reserve(parts.size());
  for (const Jet& p : parts) values.push_back(p.value);
  Jet out(concat(values));
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<Var> d;
    d.reserve(parts.size());
    for (const Jet& p : parts) d.push_back(p.is_constant() ? zeros_like(p.value) : p.tangents[k]);
    out.tangents.push_back(concat(d));
  }
  return out;
}

Jet slice(const Jet& a, Eigen::Index begin, Eigen::Index count) {
  return map_tangents(slice(a.value, begin, count), a,
                      [&](Var d) { return slice(d, begin, count); });
}

Jet row_sum(const Jet& a) {
  return map_tangents(row_sum(a.value), a, [](Var d) { return row_sum(d); });
}

Jet cross3(const Jet& a, const Jet& b) {
  const std::size_t n = common_directions(a, b);
  Jet out(cross3(a.value, b.value));
  for (std::size_t k = 0; k < n; ++k) {
    if (a.is_constant()) out.tangents.push_back(cross3(a.value, b.tangents[k]));
    else if (b.is_constant()) out.tangents.push_back(cross3(a.tangents[k], b.value));
    else out.tangents.push_back(cross3(a.tangents[k], b.value) + cross3(a.value, b.tangents[k]));
  }
  return out;
}

Jet norm2(const Jet& a) {
  const Var n = norm2(a.value);
  if (a.is_constant()) return Jet(n);
  const Var unit = a.value / n;
  return map_tangents(n, a, [&](Var d) { return row_sum(unit * d); });
}

Jet normalize3(const Jet& a) {
  const Var unit = normalize3(a.value);
  if (a.is_constant()) return Jet(unit);
  const Var inv = 1.0 / norm2(a.value);
  return map_tangents(unit, a, [&](Var d) { return (d - unit * row_sum(unit * d)) * inv; });
}

}  // namespace e4d::ad
