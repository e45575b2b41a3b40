#pragma once

#include "elastica4d/jet.hpp"
#include "elastica4d/networks.hpp"
#include "elastica4d/sphere.hpp"
#include "elastica4d/srnf.hpp"
#include "elastica4d/surface.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace e4d {

class DegenerateFieldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RegistrationError : public std::runtime_error {
 public:
  RegistrationError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

/// argmin over SO(3) of |q1 - R q2|^2: A = sum w q2 q1^T = U S V^T,
/// R = V diag(1, 1, det(V U^T)) U^T. Throws DegenerateFieldError when two
/// singular values of A vanish.
Eigen::Matrix3d estimate_rotation(const SrnfField& q1, const SrnfField& q2);

/// Sphere self-map gamma(s) = normalize(Y(s) A): one real SH expansion per
/// ambient coordinate, A is n x 3.
class SphDiffeo {
 public:
  /// Identity: the coordinate functions x, y, z projected onto the basis
  /// (exact, they are degree-one harmonics).
  explicit SphDiffeo(int max_degree = 4);

  const ShBasis& basis() const { return basis_; }
  Eigen::MatrixXd& coeffs() { return coeffs_; }
  const Eigen::MatrixXd& coeffs() const { return coeffs_; }

  /// Unit points gamma(u, v), one row per input row of (u, v).
  Eigen::MatrixX3d apply(const Eigen::MatrixX2d& angles) const;
  Eigen::Vector3d apply(double u, double v) const;

  /// Samples of the grid where gamma reverses orientation,
  /// i.e. gamma . (gamma_u x gamma_v) <= 0.
  int fold_count(const SphereGrid& grid) const;

 private:
  ShBasis basis_;
  Eigen::MatrixXd coeffs_;
};

/// Angles of gamma(s) on the tape. `values`, `du`, `dv` are the basis tables
/// at the input samples (leaves); the returned jets carry the two tangents
/// d/du, d/dv when `with_tangents` is set.
struct DiffeoAngles {
  ad::Jet u;
  ad::Jet v;
};
DiffeoAngles diffeo_angles(ad::Var values, ad::Var du, ad::Var dv, ad::Var coeffs, bool with_tangents);

/// out(s, t) = R f(gamma(s), t). The base surface must outlive the view.
class AlignedSurface final : public Surface {
 public:
  AlignedSurface(const Surface& base, const Eigen::Matrix3d& rotation, SphDiffeo diffeo);
  ad::Jet evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const override;

 private:
  const Surface* base_;
  Eigen::Matrix3d rotation_;
  SphDiffeo diffeo_;
};

/// f(angles(gamma(s)), t) for a network.
Eigen::Vector3d apply_diffeo(const DsnsModel& model, const SphDiffeo& diffeo, double u, double v, double t);

struct SpatialRegConfig {
  int iterations = 50;
  int inner_steps = 20;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int max_degree = 4;
  double tolerance = 1e-5;  // relative loss drop that ends the alternation
  /// Frames whose losses are averaged.
  std::vector<double> frames{0.0};
  SphereGrid grid{32, 32};
};

struct SpatialRegResult {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  SphDiffeo diffeo;
  double initial_loss = 0.0;         // R = I, identity gamma
  std::vector<double> loss_trace;    // after each outer iteration; entry 0 is the one-shot rotation
  bool converged = false;
  int fold_count = 0;
};

/// Value of the registration loss, averaged over cfg.frames.
double spatial_loss(const Surface& src, const Surface& tgt, const Eigen::Matrix3d& rotation, const SphDiffeo& diffeo,
                    const SpatialRegConfig& cfg);

SpatialRegResult register_spatial(const Surface& src, const Surface& tgt, const SpatialRegConfig& cfg);
SpatialRegResult register_spatial(const DsnsModel& src, const DsnsModel& tgt, const SpatialRegConfig& cfg);

}  // namespace e4d
