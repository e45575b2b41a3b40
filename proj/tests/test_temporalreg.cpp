#include "elastica4d/temporalreg.hpp"

#include <doctest.h>

#include <cmath>

using namespace e4d;

namespace {

// A smooth 3-d curve with non-vanishing speed, sampled uniformly.
EmbeddedCurve test_curve(int m, const std::function<double(double)>& warp = [](double t) { return t; }) {
  EmbeddedCurve c;
  c.times = warp_grid(m);
  c.points.resize(m, 3);
  for (int i = 0; i < m; ++i) {
    const double s = warp(c.times(i));
    c.points.row(i) << std::cos(3 * s), std::sin(2 * s), s + 0.3 * s * s;
  }
  return c;
}

double sup_identity_deviation(const TimeWarp& w) {
  const Eigen::VectorXd g = warp_grid(101);
  return (w.evaluate(g) - g).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("tabulated warps") {
  const TimeWarp id;
  CHECK(id(0.37) == doctest::Approx(0.37));
  const ClosedFormWarp cf{2.0, 1.0, 1.0};
  const TimeWarp w = TimeWarp::tabulate(cf);
  CHECK(w(0.5) == doctest::Approx(cf(0.5)).epsilon(1e-5));
  const TimeWarp inv = w.inverse();
  for (double t : {0.1, 0.5, 0.9}) CHECK(inv(w(t)) == doctest::Approx(t).epsilon(1e-6));
  Eigen::VectorXd t(3), bad(3);
  t << 0.0, 0.5, 1.0;
  bad << 0.0, 0.7, 0.6;
  CHECK_THROWS(TimeWarp::tabulated(t, bad).inverse());
  CHECK_THROWS(TimeWarp::tabulated(bad, t));
}

TEST_CASE("recover_inverse_error oracles") {
  const TimeWarp square = TimeWarp::tabulated(warp_grid(1001), warp_grid(1001).array().square());
  SUBCASE("exact inverse gives zero") { CHECK(recover_inverse_error(square, square.inverse()) < 1e-6); }
  SUBCASE("identity against t^2 gives sup |t - sqrt t| = 1/4") {
    CHECK(recover_inverse_error(square, TimeWarp()) == doctest::Approx(0.25).epsilon(1e-3));
  }
  SUBCASE("non-monotone warps are rejected") {
    Eigen::VectorXd t(3), v(3);
    t << 0.0, 0.5, 1.0;
    v << 0.0, 0.6, 0.5;
    CHECK_THROWS(recover_inverse_error(TimeWarp::tabulated(t, v), TimeWarp()));
  }
}

TEST_CASE("identity pretraining") {
  const WarpModel m = pretrained_identity(0);
  const TimeWarp raw = TimeWarp::tabulated(warp_grid(101), m.evaluate(warp_grid(101)));
  CHECK(sup_identity_deviation(raw) < 0.01);
  CHECK(m.evaluate(0.5) > 0.49);
  CHECK(m.evaluate(0.5) < 0.51);
  const auto [z, dz] = m.evaluate_with_derivative(warp_grid(101));
  CHECK(dz.minCoeff() > 0.0);
  CHECK(z.minCoeff() > 0.0);
  CHECK(z.maxCoeff() < 1.0);

  PretrainConfig tiny;
  tiny.epochs = 1;
  CHECK_THROWS_AS(pretrain_identity(WarpModel(3), tiny), PretrainError);
}

TEST_CASE("warp loss") {
  const SrvfCurve q = srvf_map(test_curve(51));
  SUBCASE("identical curves under the identity") {
    const WarpLoss l = warp_loss(q, q, TimeWarp(), 10.0);
    CHECK(l.data < 1e-20);
    CHECK(l.reg == 0.0);
  }
  SUBCASE("a decreasing piece activates the hinge") {
    Eigen::VectorXd t(4), v(4);
    t << 0.0, 0.4, 0.6, 1.0;
    v << 0.0, 0.5, 0.4, 1.0;
    const WarpLoss l = warp_loss(q, q, TimeWarp::tabulated(t, v), 10.0);
    CHECK(l.reg > 0.0);
    CHECK(l.total == doctest::Approx(l.data + 10.0 * l.reg));
  }
  SUBCASE("three-sample arithmetic") {
    // q1 = (1, 2, 3), q2 = (0, 1, 4) at t = 0, 1/2, 1; identity warp.
    SrvfCurve a{warp_grid(3), Eigen::MatrixXd(3, 1), Eigen::RowVectorXd::Zero(1), nullptr};
    SrvfCurve b = a;
    a.values << 1.0, 2.0, 3.0;
    b.values << 0.0, 1.0, 4.0;
    const double expected = 0.25 * (1.0 + 1.0) + 0.25 * (1.0 + 1.0);
    CHECK(warp_loss(a, b, TimeWarp(), 1.0, WarpAction::kPrinted).data == doctest::Approx(expected));
    // Full action with identity multiplies by sqrt(1 + 1e-12).
    CHECK(warp_loss(a, b, TimeWarp(), 1.0).data == doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("data term vanishes exactly at the warped copy") {
    const TimeWarp w = TimeWarp::tabulate(ClosedFormWarp{1.0, 1.0, 1.0});
    const SrvfCurve warped = apply_warp(q, w, WarpAction::kPrinted);
    CHECK(warp_loss(warped, q, w, 10.0, WarpAction::kPrinted).data < 1e-24);
  }
}

TEST_CASE("self registration stays at the identity") {
  const SrvfCurve q = srvf_map(test_curve(50));
  TemporalRegConfig cfg;
  cfg.epochs = 300;
  const TemporalRegResult r = register_temporal(q, q, cfg);
  CHECK(sup_identity_deviation(r.warp) < 0.05);
  CHECK(r.final_loss.data <= r.identity_loss.data + 1e-15);
  CHECK(r.converged);
}

TEST_CASE("registration recovers the inverse of an exponential warp") {
  const auto zeta0 = [](double t) { return std::expm1(2 * t) / std::expm1(2.0); };
  const SrvfCurve q1 = srvf_map(test_curve(50));
  const SrvfCurve q2 = srvf_map(test_curve(50, zeta0));
  const TimeWarp applied = TimeWarp::tabulate(ClosedFormWarp{2.0, 1.0, 1.0});
  TemporalRegConfig cfg;
  const TemporalRegResult r = register_temporal(q1, q2, cfg);
  const double err = recover_inverse_error(applied, r.warp);
  MESSAGE("inverse error ", err, " data ", r.identity_loss.data, " -> ", r.final_loss.data);
  CHECK(err < 0.05);
  CHECK(r.final_loss.reg < 1e-4);
  CHECK(r.warp.derivative(warp_grid(1001)).minCoeff() >= -1e-6);

  SUBCASE("runs are deterministic") {
    const TemporalRegResult again = register_temporal(q1, q2, cfg);
    CHECK(again.loss_trace == r.loss_trace);
  }
}
