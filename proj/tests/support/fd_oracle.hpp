#pragma once

// Central finite-difference oracle for tape primitives.

#include "elastica4d/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace e4d::testing {

struct InputSpec {
  Eigen::Index rows;
  Eigen::Index cols;
  double lo = -2.0;
  double hi = 2.0;
  double min_magnitude = 0.0;  // keep |x| away from kinks and poles
  double knot_spacing = 0.0;   // keep x away from multiples of this
};

struct PrimitiveCase {
  std::string name;
  std::vector<InputSpec> inputs;
  std::function<ad::Var(const std::vector<ad::Var>&)> build;
};

inline Eigen::MatrixXd draw(const InputSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(spec.lo, spec.hi);
  Eigen::MatrixXd m(spec.rows, spec.cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    double x = dist(rng);
    auto near_knot = [&](double y) {
      if (spec.knot_spacing <= 0.0) return false;
      const double r = y / spec.knot_spacing;
      return std::abs(r - std::round(r)) * spec.knot_spacing < 1e-3;
    };
    while (std::abs(x) < spec.min_magnitude || near_knot(x)) x = dist(rng);
    m(k) = x;
  }
  return m;
}

/// Scalar probe sum(W .* op(x)) with fixed random weights W.
inline double probe_value(const PrimitiveCase& c, const std::vector<Eigen::MatrixXd>& xs, const Eigen::MatrixXd& w) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& x : xs) vars.push_back(tape.leaf(x));
  return (c.build(vars).value().array() * w.array()).sum();
}

/// Largest |adjoint - fd| / max(1, |fd|) over all input entries, h = 1e-5.
inline double max_fd_error(const PrimitiveCase& c, std::mt19937_64& rng, double h = 1e-5) {
  std::vector<Eigen::MatrixXd> xs;
  for (const auto& spec : c.inputs) xs.push_back(draw(spec, rng));

  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& x : xs) vars.push_back(tape.variable(x));
  const ad::Var out = c.build(vars);
  Eigen::MatrixXd w(out.rows(), out.cols());
  std::uniform_real_distribution<double> wdist(-1.0, 1.0);
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = wdist(rng);
  tape.backward(ad::sum(out * tape.leaf(w)));

  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Eigen::MatrixXd adjoint = vars[i].grad();
    for (Eigen::Index k = 0; k < xs[i].size(); ++k) {
      auto plus = xs;
      auto minus = xs;
      plus[i](k) += h;
      minus[i](k) -= h;
      const double fd = (probe_value(c, plus, w) - probe_value(c, minus, w)) / (2.0 * h);
      worst = std::max(worst, std::abs(adjoint(k) - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

/// One case per primitive (plus broadcasting variants of the binary ops).
inline std::vector<PrimitiveCase> primitive_cases() {
  using V = std::vector<ad::Var>;
  const InputSpec m34{3, 4};
  const InputSpec positive{3, 4, 0.1, 2.0};
  const InputSpec nonzero{3, 4, -2.0, 2.0, 0.3};
  auto table = std::make_shared<const Eigen::MatrixXd>(
      (Eigen::MatrixXd(6, 2) << 0.0, 1.0, 0.5, -1.0, 1.5, 0.2, 0.3, 0.9, -0.7, 2.0, 0.1, 0.4).finished());
  return {
      {"add", {m34, m34}, [](const V& x) { return x[0] + x[1]; }},
      {"add-broadcast-row", {m34, {1, 4}}, [](const V& x) { return x[0] + x[1]; }},
      {"add-broadcast-col", {m34, {3, 1}}, [](const V& x) { return x[0] + x[1]; }},
      {"sub", {m34, m34}, [](const V& x) { return x[0] - x[1]; }},
      {"mul", {m34, m34}, [](const V& x) { return x[0] * x[1]; }},
      {"mul-broadcast-scalar", {m34, {1, 1}}, [](const V& x) { return x[0] * x[1]; }},
      {"div", {m34, nonzero}, [](const V& x) { return x[0] / x[1]; }},
      {"div-broadcast-col", {m34, {3, 1, -2.0, 2.0, 0.3}}, [](const V& x) { return x[0] / x[1]; }},
      {"negate", {m34}, [](const V& x) { return -x[0]; }},
      {"matmul", {m34, {4, 2}}, [](const V& x) { return ad::matmul(x[0], x[1]); }},
      {"sum", {m34}, [](const V& x) { return ad::sum(x[0]); }},
      {"mean", {m34}, [](const V& x) { return ad::mean(x[0]); }},
      {"row_sum", {m34}, [](const V& x) { return ad::row_sum(x[0]); }},
      {"softplus", {m34}, [](const V& x) { return ad::softplus(x[0]); }},
      {"sigmoid", {m34}, [](const V& x) { return ad::sigmoid(x[0]); }},
      {"sin", {m34}, [](const V& x) { return ad::sin(x[0]); }},
      {"cos", {m34}, [](const V& x) { return ad::cos(x[0]); }},
      {"sqrt", {positive}, [](const V& x) { return ad::sqrt(x[0]); }},
      {"square", {m34}, [](const V& x) { return ad::square(x[0]); }},
      {"max-with-zero", {{3, 4, -2.0, 2.0, 0.05}}, [](const V& x) { return ad::relu(x[0]); }},
      {"exp", {m34}, [](const V& x) { return ad::exp(x[0]); }},
      {"log", {positive}, [](const V& x) { return ad::log(x[0]); }},
      {"acos", {{3, 4, -0.9, 0.9}}, [](const V& x) { return ad::acos(x[0]); }},
      {"atan2", {nonzero, nonzero}, [](const V& x) { return ad::atan2(x[0], x[1]); }},
      {"concat", {m34, {3, 2}}, [](const V& x) { return ad::concat({x[0], x[1]}); }},
      {"slice", {m34}, [](const V& x) { return ad::slice(x[0], 1, 2); }},
      {"cross3", {{4, 3}, {4, 3}}, [](const V& x) { return ad::cross3(x[0], x[1]); }},
      {"norm2", {{4, 3, -2.0, 2.0, 0.2}}, [](const V& x) { return ad::norm2(x[0]); }},
      {"normalize3", {{4, 3, -2.0, 2.0, 0.2}}, [](const V& x) { return ad::normalize3(x[0]); }},
      {"interp", {{5, 1, 0.0, 1.0, 0.0, 0.2}}, [table](const V& x) { return ad::interp(x[0], table); }},
  };
}

}  // namespace e4d::testing
