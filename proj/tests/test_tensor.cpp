#include "elastica4d/jet.hpp"
#include "elastica4d/optimizer.hpp"
#include "elastica4d/tensor.hpp"
#include "support/fd_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace e4d;
using ad::Array;

namespace {

Array scalar(double x) { return Array::Constant(1, 1, x); }

}  // namespace

TEST_CASE("primitive values") {
  ad::Tape tape;
  CHECK(ad::softplus(tape.leaf(scalar(0.0))).scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(ad::sigmoid(tape.leaf(scalar(0.0))).scalar() == 0.5);
  const ad::Var a = tape.leaf((Array(1, 3) << 1, 0, 0).finished());
  const ad::Var b = tape.leaf((Array(1, 3) << 0, 1, 0).finished());
  CHECK(ad::cross3(a, b).value().isApprox((Array(1, 3) << 0, 0, 1).finished()));
  CHECK(ad::relu(tape.leaf((Array(1, 3) << -1, 0, 2).finished())).value() == (Array(1, 3) << 0, 0, 2).finished());
}

TEST_CASE("simple derivatives") {
  ad::Tape tape;
  const ad::Var x = tape.variable(scalar(3.0));
  tape.backward(ad::square(x));
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0));

  const ad::Var y = tape.variable(scalar(2.0));
  tape.backward(ad::softplus(y));
  CHECK(y.grad()(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-14));
}

TEST_CASE("max-with-zero has zero subgradient at the kink") {
  ad::Tape tape;
  const ad::Var x = tape.variable(scalar(0.0));
  tape.backward(ad::relu(x));
  CHECK(x.grad()(0, 0) == 0.0);
}

TEST_CASE("errors") {
  ad::Tape tape;
  const ad::Var a = tape.variable(Array::Ones(2, 3));
  const ad::Var b = tape.variable(Array::Ones(4, 5));
  try {
    (void)(a + b);
    FAIL("expected a shape error");
  } catch (const ad::ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("add") != std::string::npos);
    CHECK(what.find("2x3") != std::string::npos);
    CHECK(what.find("4x5") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::matmul(a, a), ad::ShapeError);
  CHECK_THROWS_AS(tape.backward(a * 2.0), ad::GradientError);
}

TEST_CASE("every primitive matches central finite differences") {
  std::mt19937_64 rng(11);
  for (const auto& c : testing::primitive_cases()) {
    for (int trial = 0; trial < 10; ++trial) {
      INFO(c.name);
      CHECK(testing::max_fd_error(c, rng) < 1e-4);
    }
  }
}

TEST_CASE("two-layer network gradients match finite differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  auto randm = [&](int r, int c) {
    Array m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = 0.5 * n(rng);
    return m;
  };
  std::vector<Array> params{randm(3, 6), randm(1, 6), randm(6, 2), randm(1, 2)};
  const Array x = randm(5, 3);
  const Array target = randm(5, 2);
  auto loss = [&](ad::Tape& tape, const std::vector<ad::Var>& p) {
    const ad::Var h = ad::softplus(ad::matmul(tape.leaf(x), p[0]) + p[1]);
    const ad::Var y = ad::matmul(h, p[2]) + p[3];
    return ad::mean(ad::square(y - tape.leaf(target)));
  };
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& p : params) vars.push_back(tape.variable(p));
  tape.backward(loss(tape, vars));
  const double h = 1e-5;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (Eigen::Index k = 0; k < params[i].size(); ++k) {
      auto eval = [&](double delta) {
        auto copy = params;
        copy[i](k) += delta;
        ad::Tape t;
        std::vector<ad::Var> v;
        for (const auto& p : copy) v.push_back(t.leaf(p));
        return loss(t, v).scalar();
      };
      const double fd = (eval(h) - eval(-h)) / (2 * h);
      const double g = vars[i].grad()(k);
      CHECK(std::abs(g - fd) / std::max(std::abs(fd), 1e-3) < 1e-4);
    }
  }
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  std::mt19937_64 rng(3);
  const Array x0 = testing::draw({4, 3}, rng);
  auto f1 = [](ad::Var x) { return ad::sum(ad::sin(x) * x); };
  auto f2 = [](ad::Var x) { return ad::sum(ad::softplus(ad::square(x))); };
  Array g1, g2, g12;
  {
    ad::Tape t;
    const ad::Var x = t.variable(x0);
    t.backward(f1(x));
    g1 = x.grad();
    t.backward(f2(x));
    g2 = x.grad();
    t.backward(f1(x) + f2(x));
    g12 = x.grad();
  }
  CHECK((g12 - g1 - g2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward is idempotent and leaves non-ancestors at zero") {
  ad::Tape tape;
  const ad::Var x = tape.variable((Array(2, 2) << 1, 2, 3, 4).finished());
  const ad::Var unrelated = tape.variable(Array::Ones(2, 2));
  const ad::Var out = ad::sum(ad::exp(x) * x);
  tape.backward(out);
  const Array first = x.grad();
  tape.backward(out);
  CHECK(x.grad() == first);
  CHECK(unrelated.grad().isZero(0.0));
}

TEST_CASE("jet tangents are exact directional derivatives") {
  const double u0 = 0.7, v0 = 1.9;
  auto f = [](const ad::Jet& u, const ad::Jet& v) {
    const ad::Jet parts[] = {ad::sin(u) * ad::cos(v), ad::exp(u * v), ad::atan2(v, u + 2.0)};
    return ad::normalize3(ad::concat(parts));
  };
  ad::Tape tape;
  const ad::Jet out = f(ad::seed(tape.leaf(scalar(u0)), 0, 2), ad::seed(tape.leaf(scalar(v0)), 1, 2));
  const double h = 1e-6;
  auto value = [&](double u, double v) {
    ad::Tape t;
    return Array(f(t.leaf(scalar(u)), t.leaf(scalar(v))).value.value());
  };
  const Array du = (value(u0 + h, v0) - value(u0 - h, v0)) / (2 * h);
  const Array dv = (value(u0, v0 + h) - value(u0, v0 - h)) / (2 * h);
  CHECK((out.tangents[0].value() - du).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((out.tangents[1].value() - dv).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("reverse mode through jet tangents") {
  // d/da of (d/du sin(a u))|_{u=1} = d/da a cos(a) = cos(a) - a sin(a).
  ad::Tape tape;
  const ad::Var a = tape.variable(scalar(0.4));
  const ad::Jet u = ad::seed(tape.leaf(scalar(1.0)), 0, 1);
  const ad::Jet y = ad::sin(u * ad::Jet(a));
  tape.backward(ad::sum(y.tangents[0]));
  CHECK(a.grad()(0, 0) == doctest::Approx(std::cos(0.4) - 0.4 * std::sin(0.4)).epsilon(1e-13));
}

TEST_CASE("rmsprop") {
  SUBCASE("zero gradients leave parameters unchanged") {
    RmsProp opt;
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(2, 2, 1.5);
    const std::vector<Eigen::MatrixXd*> params{&p};
    const std::vector<Eigen::MatrixXd> grads{Eigen::MatrixXd::Zero(2, 2)};
    opt.step(params, grads);
    CHECK(p == Eigen::MatrixXd::Constant(2, 2, 1.5));
  }
  SUBCASE("hand arithmetic") {
    RmsProp opt({0.1, 0.9, 1e-8});
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(1, 1, 1.0);
    const std::vector<Eigen::MatrixXd*> params{&p};
    const std::vector<Eigen::MatrixXd> grads{Eigen::MatrixXd::Constant(1, 1, 1.0)};
    opt.step(params, grads);
    CHECK(opt.accumulators()[0](0, 0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(p(0, 0) == doctest::Approx(1.0 - 0.1 / (std::sqrt(0.1) + 1e-8)).epsilon(1e-15));
  }
  SUBCASE("update magnitude approaches the learning rate") {
    RmsProp opt({0.01, 0.9, 1e-8});
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(1, 1);
    const std::vector<Eigen::MatrixXd*> params{&p};
    const std::vector<Eigen::MatrixXd> grads{Eigen::MatrixXd::Constant(1, 1, 3.0)};
    double last = 0.0;
    for (int k = 0; k < 300; ++k) {
      const double before = p(0, 0);
      opt.step(params, grads);
      last = before - p(0, 0);
      CHECK((opt.accumulators()[0].array() >= 0.0).all());
    }
    CHECK(last == doctest::Approx(0.01).epsilon(1e-6));
  }
  SUBCASE("shape mismatch") {
    RmsProp opt;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, 2);
    const std::vector<Eigen::MatrixXd*> params{&p};
    const std::vector<Eigen::MatrixXd> grads{Eigen::MatrixXd::Zero(3, 2)};
    CHECK_THROWS_AS(opt.step(params, grads), ad::ShapeError);
  }
}
