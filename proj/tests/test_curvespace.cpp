#include "elastica4d/curvespace.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace e4d;

namespace {

Eigen::VectorXd uniform(int m) { return Eigen::VectorXd::LinSpaced(m, 0.0, 1.0); }

EmbeddedCurve sampled(int m, const std::function<Eigen::RowVectorXd(double)>& f) {
  EmbeddedCurve c;
  c.times = uniform(m);
  c.points.resize(m, f(0.0).size());
  for (int i = 0; i < m; ++i) c.points.row(i) = f(c.times(i));
  return c;
}

Eigen::RowVectorXd smooth_curve(double t) {
  return (Eigen::RowVectorXd(4) << std::cos(2 * t), std::sin(3 * t), t * t, std::exp(t)).finished();
}

std::vector<Eigen::VectorXd> random_frames(int n, int d, int rank, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd span(d, rank);
  for (Eigen::Index i = 0; i < span.size(); ++i) span.data()[i] = g(rng);
  Eigen::VectorXd offset(d);
  for (Eigen::Index i = 0; i < d; ++i) offset(i) = g(rng);
  std::vector<Eigen::VectorXd> frames;
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd c(rank), e(d);
    for (int i = 0; i < rank; ++i) c(i) = g(rng);
    for (int i = 0; i < d; ++i) e(i) = noise * g(rng);
    frames.push_back(offset + span * c + e);
  }
  return frames;
}

}  // namespace

TEST_CASE("pca basis structure") {
  const auto frames = random_frames(40, 60, 5, 0.0, 1);
  const PcaBasis b = fit_pca(frames, 10, 1.0);
  CHECK(b.rank() == 5);
  CHECK((b.components * b.components.transpose() - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
  for (Eigen::Index i = 1; i < b.explained.size(); ++i) CHECK(b.explained(i) <= b.explained(i - 1));
  CHECK(b.explained.sum() <= 1.0 + 1e-12);
  CHECK_FALSE(b.degenerate);

  SUBCASE("completeness") {
    for (const auto& f : frames) CHECK((b.reconstruct(b.embed(f)) - f).norm() < 1e-8);
  }
  SUBCASE("embedding is affine-linear and maps the mean to zero") {
    CHECK(b.embed(b.mean).norm() < 1e-12);
    const Eigen::VectorXd x = frames[0] - b.mean, y = frames[1] - b.mean;
    const Eigen::VectorXd lhs = b.embed(b.mean + 2.0 * x - 0.5 * y);
    const Eigen::VectorXd rhs = 2.0 * b.embed(frames[0]) - 0.5 * b.embed(frames[1]);
    CHECK((lhs - rhs).norm() < 1e-10);
  }
  SUBCASE("pairwise distances survive embedding") {
    double worst = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t j = i + 1; j < 10; ++j) {
        worst = std::max(worst, std::abs((frames[i] - frames[j]).norm() - (b.embed(frames[i]) - b.embed(frames[j])).norm()));
      }
    }
    CHECK(worst < 1e-8);
  }
  SUBCASE("dimension mismatch") { CHECK_THROWS_AS(b.embed(Eigen::VectorXd::Zero(7)), CurveError); }
}

TEST_CASE("pca on a line and on a planted subspace") {
  const Eigen::VectorXd dir = Eigen::VectorXd::LinSpaced(9, -1.0, 1.0).normalized();
  const Eigen::VectorXd base = Eigen::VectorXd::Constant(9, 0.3);
  std::vector<Eigen::VectorXd> line;
  for (double s : {-2.0, -0.5, 0.1, 1.0, 3.0}) line.push_back(base + s * dir);
  const PcaBasis b = fit_pca(line, 10, 0.99);
  CHECK(b.rank() == 1);
  CHECK(std::abs(std::abs(b.components.row(0).dot(dir)) - 1.0) < 1e-12);

  CHECK(fit_pca(random_frames(100, 200, 3, 1e-6, 2), 10, 0.99).rank() == 3);
  CHECK(fit_pca(random_frames(100, 200, 12, 0.0, 3), 10, 1.0).rank() == 10);
}

TEST_CASE("pca on identical frames is flagged degenerate") {
  const std::vector<Eigen::VectorXd> same(4, Eigen::VectorXd::Constant(6, 0.7));
  const PcaBasis b = fit_pca(same);
  CHECK(b.degenerate);
  CHECK(b.rank() == 1);
  CHECK(b.explained(0) == 0.0);
  CHECK_THROWS_AS(fit_pca({same[0]}), CurveError);
}

TEST_CASE("sequences embed and reconstruct") {
  SampledSequence4D seq{"s", SphereGrid(4, 4), uniform_times(6), {}};
  for (int k = 0; k < 6; ++k) {
    seq.frames.push_back(seq.grid.points() * (1.0 - 0.05 * k) + Eigen::MatrixX3d::Constant(16, 3, 0.01 * k * k));
  }
  auto basis = std::make_shared<const PcaBasis>(fit_pca(pooled_frames({&seq}), 10, 1.0));
  const EmbeddedCurve c = embed_sequence(seq, basis);
  CHECK(c.points.rows() == 6);
  const SampledSequence4D back = reconstruct_sequence(c, seq.grid, "back");
  CHECK(mean_point_error(seq, back) < 1e-10);
}

TEST_CASE("srvf analytic cases") {
  SUBCASE("straight line at constant speed") {
    const Eigen::RowVector3d v(1.0, -2.0, 0.5);
    const SrvfCurve q = srvf_map(sampled(21, [&](double t) { return Eigen::RowVectorXd(v * t); }));
    const Eigen::RowVector3d expected = v / std::sqrt(v.norm());
    for (Eigen::Index m = 0; m < 21; ++m) CHECK((q.values.row(m) - expected).norm() < 1e-12);
  }
  SUBCASE("constant curve") {
    const SrvfCurve q = srvf_map(sampled(11, [](double) { return Eigen::RowVectorXd::Constant(3, 2.0); }));
    CHECK(q.values.isZero(0.0));
    const EmbeddedCurve back = srvf_invert(q);
    for (Eigen::Index m = 0; m < 11; ++m) CHECK(back.points.row(m) == Eigen::RowVectorXd::Constant(3, 2.0));
  }
  SUBCASE("quadratic: q = sqrt(2t) e1") {
    const SrvfCurve q = srvf_map(sampled(201, [](double t) { return Eigen::RowVectorXd(Eigen::RowVector2d(t * t, 0.0)); }));
    double worst = 0.0;
    for (Eigen::Index m = 0; m < 201; ++m) {
      worst = std::max(worst, std::abs(q.values(m, 0) - std::sqrt(2 * q.times(m))) + std::abs(q.values(m, 1)));
    }
    CHECK(worst < 1e-3);
  }
  SUBCASE("constant q inverts to an exact line") {
    SrvfCurve q{uniform(31), Eigen::MatrixXd(31, 2), Eigen::RowVector2d(0.5, -1.0), nullptr};
    const Eigen::RowVector2d c(0.3, 0.4);
    q.values.rowwise() = c;
    const EmbeddedCurve a = srvf_invert(q);
    for (Eigen::Index m = 0; m < 31; ++m) {
      CHECK((a.points.row(m) - (q.start_point + c * c.norm() * a.times(m))).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("srvf round trip converges at second order") {
  std::vector<double> errors;
  for (int m : {51, 101, 201}) {
    const EmbeddedCurve a = sampled(m, smooth_curve);
    const EmbeddedCurve b = srvf_invert(srvf_map(a));
    errors.push_back((a.points - b.points).cwiseAbs().maxCoeff());
  }
  CHECK(errors.back() < 1e-3);
  const double order = std::log(errors[0] / errors[2]) / std::log(200.0 / 50.0);
  MESSAGE("round trip errors ", errors[0], " ", errors[1], " ", errors[2], " order ", order);
  CHECK(order >= 1.8);
}

TEST_CASE("curve l2") {
  const auto f1 = [](double t) { return Eigen::RowVectorXd(Eigen::RowVector2d(std::sin(3 * t), t)); };
  const auto f2 = [](double t) { return Eigen::RowVectorXd(Eigen::RowVector2d(std::cos(t), t * t)); };
  const auto as_srvf = [](const EmbeddedCurve& c) { return SrvfCurve{c.times, c.points, c.points.row(0), nullptr}; };
  const SrvfCurve a = as_srvf(sampled(50, f1)), b = as_srvf(sampled(50, f2));
  const SrvfCurve da = as_srvf(sampled(500, f1)), db = as_srvf(sampled(500, f2));
  CHECK(curve_l2(a, a) == 0.0);
  CHECK(curve_l2(a, b) == curve_l2(b, a));
  CHECK(curve_l2(a, b) > 0.0);
  CHECK(std::abs(curve_l2(a, b) - curve_l2(da, db)) / curve_l2(da, db) < 0.01);
  CHECK_THROWS_AS(curve_l2(a, da), CurveError);

  SUBCASE("srvf distance is not invariant under resampling") {
    const SrvfCurve q = srvf_map(sampled(101, smooth_curve));
    SrvfCurve warped = q;
    const Eigen::VectorXd zeta = q.times.array().square();
    warped.values = interpolate_rows(q.times, q.values, zeta);
    CHECK(curve_l2(q, q) == 0.0);
    CHECK(curve_l2(q, warped) > 1e-3);
  }
}

TEST_CASE("row interpolation") {
  const Eigen::VectorXd t = uniform(5);
  Eigen::MatrixXd y(5, 1);
  y << 0.0, 1.0, 4.0, 9.0, 16.0;
  Eigen::VectorXd at(4);
  at << 0.0, 0.125, 1.0, 1.5;
  const Eigen::MatrixXd out = interpolate_rows(t, y, at);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(1, 0) == doctest::Approx(0.5));
  CHECK(out(2, 0) == 16.0);
  CHECK(out(3, 0) == 16.0);
}
