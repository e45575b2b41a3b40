#pragma once

#include "elastica4d/jet.hpp"
#include "elastica4d/networks.hpp"
#include "elastica4d/sequence.hpp"
#include "elastica4d/sphere.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace e4d {

class PoleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A continuous 4D surface (u, v, t) -> R^3, evaluated in batches on a tape.
/// Inputs are B x 1 columns; the result is B x 3. Tangents carried by the
/// inputs are pushed through, which gives exact partial derivatives.
class Surface {
 public:
  virtual ~Surface() = default;
  virtual ad::Jet evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const = 0;
};

/// Surface view of a fitted network. The model must outlive the view.
class DsnsSurface final : public Surface {
 public:
  explicit DsnsSurface(const DsnsModel& model) : model_(&model) {}
  ad::Jet evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const override;

 private:
  const DsnsModel* model_;
};

/// Point positions and raw partials at a batch of (u, v) for one time.
struct SurfacePartials {
  Eigen::MatrixX3d point;
  Eigen::MatrixX3d du;
  Eigen::MatrixX3d dv;
  Eigen::MatrixX3d dt;
};

Eigen::MatrixX3d sample_points(const Surface& surface, const Eigen::MatrixX2d& angles, double t);

/// Throws PoleError if some u is not strictly inside (0, pi).
SurfacePartials surface_partials(const Surface& surface, const Eigen::MatrixX2d& angles, double t);

/// Unnormalized normals f_u x f_v; their length is the local area element.
Eigen::MatrixX3d surface_normals(const Surface& surface, const Eigen::MatrixX2d& angles, double t);

SampledSequence4D sample_sequence(const Surface& surface, const SphereGrid& grid, const std::vector<double>& times,
                                  const std::string& name = "");

}  // namespace e4d
