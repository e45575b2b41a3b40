#pragma once

#include "elastica4d/jet.hpp"
#include "elastica4d/networks.hpp"
#include "elastica4d/sphere.hpp"
#include "elastica4d/surface.hpp"

#include <Eigen/Dense>

namespace e4d {

/// Square-root normal field Q = n / sqrt(|n|) sampled on a grid, rows in grid order.
struct SrnfField {
  SphereGrid grid;
  Eigen::MatrixX3d values;
  int degenerate_count = 0;  // samples with |n| < 1e-12, mapped to zero
};

/// Q from unnormalized normals; zero where |n| < 1e-12.
SrnfField srnf_from_normals(const SphereGrid& grid, const Eigen::MatrixX3d& normals);

SrnfField srnf_map(const Surface& surface, double t, const SphereGrid& grid);
SrnfField srnf_map(const DsnsModel& model, double t, const SphereGrid& grid);

/// Sum over the grid of w_ij <a_ij, b_ij>. Throws GridMismatch on different grids.
double l2_inner(const SrnfField& a, const SrnfField& b);
/// |a - b|^2 under the same inner product.
double l2_distance_squared(const SrnfField& a, const SrnfField& b);

/// Q rows from a B x 3 normal block on the tape; smooth at zero normals.
ad::Var srnf_rows(ad::Var normals);

}  // namespace e4d
