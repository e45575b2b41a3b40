#include "elastica4d/stats4d.hpp"
#include "elastica4d/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace e4d;

namespace {

SynthSurface bump_surface() {
  SynthSpec spec;
  spec.family = Family::kBumpArticulation;
  spec.amplitude = 0.4;
  spec.seed = 3;
  return SynthSurface(spec);
}

PairConfig small_pair() {
  PairConfig cfg;
  cfg.grid = SphereGrid(16, 16);
  cfg.spatial_cfg.grid = SphereGrid(16, 16);
  cfg.time_samples = 40;
  return cfg;
}

double max_identity_deviation(const TimeWarp& w) {
  const Eigen::VectorXd g = warp_grid(101);
  return (w.evaluate(g) - g).cwiseAbs().maxCoeff();
}

// Sphere whose radius moves linearly from 0.5 to 0.9 (or back).
class LinearSphere final : public Surface {
 public:
  explicit LinearSphere(bool reversed) : reversed_(reversed) {}
  ad::Jet evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const override {
    const ad::Jet r = reversed_ ? 0.9 - 0.4 * t : 0.5 + 0.4 * t;
    const ad::Jet su = ad::sin(u) * r;
    const ad::Jet parts[] = {su * ad::cos(v), su * ad::sin(v), ad::cos(u) * r};
    return ad::concat(parts);
  }

 private:
  bool reversed_;
};

SrvfCurve line_srvf(const Eigen::RowVectorXd& v) {
  SrvfCurve q{warp_grid(21), Eigen::MatrixXd(21, v.size()), Eigen::RowVectorXd::Zero(v.size()), nullptr};
  q.values.rowwise() = v / std::sqrt(v.norm());
  return q;
}

}  // namespace

TEST_CASE("geodesic between straight lines") {
  const Eigen::RowVector3d v(1.0, 2.0, -0.5), w(-0.3, 0.4, 2.0);
  const SrvfCurve q1 = line_srvf(v), q2 = line_srvf(w);
  const GeodesicPath path = geodesic(q1, q2, default_taus(5), SphereGrid(4, 4));
  REQUIRE(path.curves.size() == 5);
  CHECK(path.sequences.empty());

  const Eigen::RowVector3d c = 0.5 * (v / std::sqrt(v.norm()) + w / std::sqrt(w.norm()));
  const EmbeddedCurve& mid = path.curves[2];
  for (Eigen::Index m = 0; m < mid.times.size(); ++m) {
    CHECK((mid.points.row(m) - c * c.norm() * mid.times(m)).norm() < 1e-6);
  }
  for (Eigen::Index m = 0; m < 21; ++m) {
    CHECK((path.curves[0].points.row(m) - v * path.curves[0].times(m)).norm() < 1e-12);
    CHECK((path.curves[4].points.row(m) - w * path.curves[4].times(m)).norm() < 1e-12);
  }

  SUBCASE("length is additive along the line") {
    const double whole = std::sqrt(curve_l2(q1, q2));
    CHECK(std::abs(path_length(q1, q2, default_taus(5)) - whole) < 1e-10);
    CHECK(std::abs(path_length(q1, q2, {0.0, 0.1, 0.7, 1.0}) - whole) < 1e-10);
  }
  SUBCASE("identical endpoints give a constant path") {
    const GeodesicPath flat = geodesic(q1, q1, default_taus(3), SphereGrid(4, 4));
    CHECK(flat.curves[0].points == flat.curves[1].points);
    CHECK(flat.curves[1].points == flat.curves[2].points);
  }
  SUBCASE("different bases are rejected") {
    SrvfCurve other = q2;
    other.basis = std::make_shared<const PcaBasis>();
    CHECK_THROWS_AS(geodesic(q1, other, default_taus(), SphereGrid(4, 4)), CurveError);
  }
}

TEST_CASE("self registration of a pair") {
  const SynthSurface s = bump_surface();
  const PairResult r = register_pair(s, s, small_pair());
  CHECK(max_identity_deviation(r.warp) < 0.05);
  CHECK((r.spatial.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(relative_l2_error(r.registered_tgt, r.src) < 1e-2);

  SUBCASE("geodesic endpoints reproduce the registered inputs") {
    const GeodesicPath path = geodesic(r.q1, r.q2_registered, {0.0, 1.0}, r.src.grid);
    CHECK(relative_l2_error(path.sequences[0], r.src) < 1e-2);
    CHECK(relative_l2_error(path.sequences[1], r.registered_tgt) < 1e-2);
  }
}

TEST_CASE("disabled temporal stage returns the identity warp") {
  const SynthSurface s = bump_surface();
  PairConfig cfg = small_pair();
  cfg.temporal = false;
  cfg.spatial_cfg.iterations = 2;
  const PairResult r = register_pair(s, s, cfg);
  CHECK_FALSE(r.temporal.has_value());
  CHECK(max_identity_deviation(r.warp) == 0.0);
  CHECK(r.q2_registered.values == r.q2.values);
}

TEST_CASE("pair with a known rotation and time warp") {
  const SynthSurface s = bump_surface();
  GroundTruthPerturbation gt;
  gt.rotation = random_rotation(4);
  gt.time_warp = ClosedFormWarp{1.5, 1.0, 1.0};
  const PerturbedSurface tgt(s, gt);
  PairConfig cfg = small_pair();
  cfg.spatial_cfg.iterations = 5;
  const PairResult r = register_pair(s, tgt, cfg);
  const double err = recover_inverse_error(TimeWarp::tabulate(gt.time_warp), r.warp);
  MESSAGE("inverse error ", err, " spatial ", r.spatial.initial_loss, " -> ", r.spatial.loss_trace.back());
  CHECK(err < 0.05);
  CHECK(r.spatial.loss_trace.back() < 0.05 * r.spatial.initial_loss);
}

TEST_CASE("stage failures carry their stage") {
  const SynthSurface s = bump_surface();
  PairConfig cfg = small_pair();
  cfg.spatial = false;
  cfg.temporal_cfg.lambda = -1.0;
  try {
    register_pair(s, s, cfg);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "temporal");
    CHECK(std::string(e.what()).rfind("[temporal]", 0) == 0);
  }
}

TEST_CASE("karcher mean of identical inputs is a fixed point") {
  const SynthSurface s = bump_surface();
  MeanConfig cfg;
  cfg.pair = small_pair();
  cfg.pair.spatial = false;
  cfg.pair.temporal_cfg.epochs = 500;
  const MeanResult m = karcher_mean(std::vector<const Surface*>{&s, &s, &s}, cfg);
  const SampledSequence4D seq = sample_sequence(s, cfg.pair.grid, uniform_times(cfg.pair.time_samples));
  CHECK(relative_l2_error(m.mean_sequence, seq) < 1e-2);
  for (const TimeWarp& w : m.warps) CHECK(max_identity_deviation(w) < 0.05);
  for (std::size_t k = 1; k < m.objective_trace.size(); ++k) CHECK(m.objective_trace[k] <= m.objective_trace[k - 1]);
}

TEST_CASE("karcher mean of opposite curves cancels") {
  // Radius moving linearly in t and its time reversal: q2 = -q1 exactly.
  const LinearSphere forward(false), backward(true);
  MeanConfig cfg;
  cfg.pair = small_pair();
  cfg.pair.spatial = false;
  cfg.pair.temporal = false;
  const MeanResult m = karcher_mean(std::vector<const Surface*>{&forward, &backward}, cfg);
  CHECK(m.mean_srvf.values.cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::VectorXd mean_frame = m.basis->mean;
  for (int k = 0; k < m.mean_sequence.frame_count(); ++k) {
    CHECK((m.mean_sequence.flat_frame(k) - mean_frame).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("refitting with zero epochs returns the initialized model") {
  const SynthSurface s = bump_surface();
  const SampledSequence4D seq = sample_sequence(s, SphereGrid(8, 8), uniform_times(4));
  FitConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 64;
  cfg.architecture = DsnsArchitecture{1, 16, {2, 2, true}};
  const DsnsModel m = refit_mean_dsns(seq, cfg);
  const DsnsModel fresh(cfg.architecture, cfg.seed);
  CHECK(m.evaluate(1.0, 2.0, 0.5) == fresh.evaluate(1.0, 2.0, 0.5));
}
