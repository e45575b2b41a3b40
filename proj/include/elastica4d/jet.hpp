#pragma once

// Forward-mode tangents carried as tape variables.
//
// A Jet holds a value and its directional derivatives with respect to some
// fixed set of input directions. Every component is an ordinary node on the
// tape, so a loss built from tangents (normals, time derivatives) is itself
// reverse-differentiable with first-order primitives only.
//
// A Jet with no tangents is a constant with respect to those directions.

#include "elastica4d/tensor.hpp"

#include <vector>

namespace e4d::ad {

struct Jet {
  Var value;
  std::vector<Var> tangents;

  Jet() = default;
  Jet(Var v) : value(v) {}  // NOLINT: implicit lift of a constant
  Jet(Var v, std::vector<Var> d) : value(v), tangents(std::move(d)) {}

  Tape& tape() const { return *value.tape(); }
  std::size_t directions() const { return tangents.size(); }
  bool is_constant() const { return tangents.empty(); }
};

/// Input column seeded with a unit tangent in direction `which` out of `count`.
Jet seed(Var value, std::size_t which, std::size_t count);

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator*(const Jet& a, const Jet& b);
Jet operator/(const Jet& a, const Jet& b);
Jet operator-(const Jet& a);
Jet operator+(const Jet& a, double b);
Jet operator+(double a, const Jet& b);
Jet operator-(const Jet& a, double b);
Jet operator-(double a, const Jet& b);
Jet operator*(const Jet& a, double b);
Jet operator*(double a, const Jet& b);
Jet operator/(const Jet& a, double b);
Jet operator/(double a, const Jet& b);

Jet sin(const Jet& a);
Jet cos(const Jet& a);
Jet exp(const Jet& a);
Jet sqrt(const Jet& a);
Jet square(const Jet& a);
Jet softplus(const Jet& a);
Jet sigmoid(const Jet& a);
Jet acos(const Jet& a, double clamp = 0.0);
Jet atan2(const Jet& y, const Jet& x);
/// Right-multiplies value and tangents by a matrix that carries no tangent.
Jet matmul(const Jet& a, Var b);
Jet concat(std::span<const Jet> parts);
Jet slice(const Jet& a, Eigen::Index begin, Eigen::Index count);
Jet row_sum(const Jet& a);
Jet cross3(const Jet& a, const Jet& b);
Jet norm2(const Jet& a);
Jet normalize3(const Jet& a);

}  // namespace e4d::ad
