#include "elastica4d/surface.hpp"

#include <numbers>

namespace e4d {

namespace {

constexpr Eigen::Index kChunk = 8192;

void check_interior(const Eigen::MatrixX2d& angles) {
  for (Eigen::Index r = 0; r < angles.rows(); ++r) {
    const double u = angles(r, 0);
    if (!(u > 0.0 && u < std::numbers::pi)) {
      throw PoleError("surface partials requested at u = " + std::to_string(u) + " (pole)");
    }
  }
}

}  // namespace

ad::Jet DsnsSurface::evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const {
  const auto params = model_->mlp().bind(u.tape(), false);
  return model_->forward(params, u, v, t);
}

Eigen::MatrixX3d sample_points(const Surface& surface, const Eigen::MatrixX2d& angles, double t) {
  Eigen::MatrixX3d out(angles.rows(), 3);
  for (Eigen::Index start = 0; start < angles.rows(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, angles.rows() - start);
    ad::Tape tape;
    const ad::Var u = tape.leaf(angles.block(start, 0, n, 1));
    const ad::Var v = tape.leaf(angles.block(start, 1, n, 1));
    const ad::Var time = tape.leaf(Eigen::MatrixXd::Constant(n, 1, t));
    out.middleRows(start, n) = surface.evaluate(u, v, time).value.value();
  }
  return out;
}

SurfacePartials surface_partials(const Surface& surface, const Eigen::MatrixX2d& angles, double t) {
  check_interior(angles);
  const Eigen::Index rows = angles.rows();
  SurfacePartials out{Eigen::MatrixX3d(rows, 3), Eigen::MatrixX3d(rows, 3), Eigen::MatrixX3d(rows, 3),
                      Eigen::MatrixX3d(rows, 3)};
  for (Eigen::Index start = 0; start < rows; start += kChunk) {
    const Eigen::Index n = std::min(kChunk, rows - start);
    ad::Tape tape;
    const ad::Jet u = ad::seed(tape.leaf(angles.block(start, 0, n, 1)), 0, 3);
    const ad::Jet v = ad::seed(tape.leaf(angles.block(start, 1, n, 1)), 1, 3);
    const ad::Jet time = ad::seed(tape.leaf(Eigen::MatrixXd::Constant(n, 1, t)), 2, 3);
    const ad::Jet f = surface.evaluate(u, v, time);
    out.point.middleRows(start, n) = f.value.value();
    out.du.middleRows(start, n) = f.tangents[0].value();
    out.dv.middleRows(start, n) = f.tangents[1].value();
    out.dt.middleRows(start, n) = f.tangents[2].value();
  }
  return out;
}

Eigen::MatrixX3d surface_normals(const Surface& surface, const Eigen::MatrixX2d& angles, double t) {
  const SurfacePartials p = surface_partials(surface, angles, t);
  Eigen::MatrixX3d n(angles.rows(), 3);
  for (Eigen::Index r = 0; r < n.rows(); ++r) {
    n.row(r) = p.du.row(r).cross(p.dv.row(r));
  }
  return n;
}

SampledSequence4D sample_sequence(const Surface& surface, const SphereGrid& grid, const std::vector<double>& times,
                                  const std::string& name) {
  SampledSequence4D seq;
  seq.name = name;
  seq.grid = grid;
  seq.times = times;
  const Eigen::MatrixX2d angles = grid.angles();
  seq.frames.reserve(times.size());
  for (double t : times) seq.frames.push_back(sample_points(surface, angles, t));
  return seq;
}

}  // namespace e4d
