#include "elastica4d/srnf.hpp"

#include <cmath>

namespace e4d {

namespace {

constexpr double kDegenerateNormal = 1e-12;

}  // namespace

SrnfField srnf_from_normals(const SphereGrid& grid, const Eigen::MatrixX3d& normals) {
  if (normals.rows() != grid.size()) throw GridMismatch("srnf: normal count does not match the grid");
  SrnfField field{grid, Eigen::MatrixX3d(normals.rows(), 3), 0};
  for (Eigen::Index r = 0; r < normals.rows(); ++r) {
    const double len = normals.row(r).norm();
    if (len < kDegenerateNormal) {
      field.values.row(r).setZero();
      ++field.degenerate_count;
    } else {
      field.values.row(r) = normals.row(r) / std::sqrt(len);
    }
  }
  return field;
}

SrnfField srnf_map(const Surface& surface, double t, const SphereGrid& grid) {
  return srnf_from_normals(grid, surface_normals(surface, grid.angles(), t));
}

SrnfField srnf_map(const DsnsModel& model, double t, const SphereGrid& grid) {
  return srnf_map(DsnsSurface(model), t, grid);
}

double l2_inner(const SrnfField& a, const SrnfField& b) {
  if (!(a.grid == b.grid)) throw GridMismatch("l2_inner: fields live on different grids");
  return a.grid.weights().dot(a.values.cwiseProduct(b.values).rowwise().sum());
}

double l2_distance_squared(const SrnfField& a, const SrnfField& b) {
  if (!(a.grid == b.grid)) throw GridMismatch("l2_distance: fields live on different grids");
  return a.grid.weights().dot((a.values - b.values).rowwise().squaredNorm());
}

ad::Var srnf_rows(ad::Var normals) {
  // |n|^{-1/2} = (|n|^2 + tiny)^{-1/4}; the offset keeps gradients finite at n = 0.
  const ad::Var len2 = ad::row_sum(ad::square(normals)) + 1e-40;
  return normals / ad::sqrt(ad::sqrt(len2));
}

}  // namespace e4d
