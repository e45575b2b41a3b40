#pragma once

#include "elastica4d/sequence.hpp"
#include "elastica4d/surface.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace e4d {

enum class Family { kBreathingEllipsoid, kBumpArticulation, kTwist };

std::string family_name(Family family);
/// Accepts "breathing-ellipsoid", "bump-articulation", "twist".
Family parse_family(const std::string& name);

/// Closed-form synthetic 4D surfaces. Raw geometry per family, with A the
/// amplitude and s the unit sphere point at (u, v):
///   breathing-ellipsoid  diag(1 + A sin(pi t), 1 + 0.6 A sin(2 pi t), 1 - 0.5 A sin^2(pi t)) s,  |A| <= 0.5
///   bump-articulation    (1 + A exp((s . p(t) - 1) / 0.15)) s,  p(t) sweeping polar angle pi/4 -> 3pi/4,
///                        azimuth drawn from the seed,  0 <= A <= 0.5
///   twist                R_z(A (pi/2) t cos u) diag(1, 1 - 0.25|A|, 1) s,  |A| <= 1
/// Every family stays inside the ball of radius `scale()`; sampled
/// coordinates are divided by it, so the whole sequence fits [-1, 1]^3.
struct SynthSpec {
  Family family = Family::kBreathingEllipsoid;
  double amplitude = 0.3;
  SphereGrid grid;
  std::vector<double> times = uniform_times(30);
  std::uint64_t seed = 0;
  std::string name;
};

class SynthSurface final : public Surface {
 public:
  /// Throws std::invalid_argument when the amplitude is outside the family's bound.
  explicit SynthSurface(const SynthSpec& spec);

  const SynthSpec& spec() const { return spec_; }
  double scale() const { return scale_; }

  /// Unnormalized geometry.
  template <typename S>
  std::array<S, 3> raw(const S& u, const S& v, const S& t) const;

  /// Normalized point (raw / scale).
  Eigen::Vector3d point(double u, double v, double t) const;
  /// Unnormalized normal of the normalized surface, f_u x f_v.
  Eigen::Vector3d normal(double u, double v, double t) const;

  ad::Jet evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const override;

 private:
  SynthSpec spec_;
  double scale_ = 1.0;
  Eigen::Vector3d bump_axis_ = Eigen::Vector3d::UnitX();  // horizontal direction of the bump sweep
};

/// Samples the surface on spec.grid at spec.times.
SampledSequence4D generate(const SynthSpec& spec);

/// zeta(t) = E_a(M_c(t^p)) with E_a(s) = (e^{a s} - 1)/(e^a - 1) and the
/// Moebius map M_c(s) = s / (s + c (1 - s)), c > 0, p > 0. Strictly increasing,
/// zeta(0) = 0, zeta(1) = 1; a = 0, c = 1, p = 1 is the identity.
struct ClosedFormWarp {
  double a = 0.0;
  double c = 1.0;
  double power = 1.0;

  double operator()(double t) const;
  double derivative(double t) const;
  double inverse(double s) const;
  void validate() const;
};

/// s -> normalize(s + c e3) followed by a rotation; bijective for |c| < 1.
struct SquashDiffeo {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double c = 0.0;

  Eigen::Vector3d operator()(const Eigen::Vector3d& s) const;
  Eigen::Vector3d inverse(const Eigen::Vector3d& p) const;
};

struct GroundTruthPerturbation {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  SquashDiffeo sphere_diffeo;
  ClosedFormWarp time_warp;
  std::uint64_t seed = 0;
};

/// Uniformly distributed rotation from a seed.
Eigen::Matrix3d random_rotation(std::uint64_t seed);

/// (R, squash, warp) drawn from the seed: random rotations, |c| <= max_squash,
/// warps as in sample_random_warps.
GroundTruthPerturbation random_perturbation(std::uint64_t seed, double max_squash = 0.2);

/// out(s, t) = R f(gamma0(s), zeta0(t)).
class PerturbedSurface final : public Surface {
 public:
  /// The base surface must outlive this view.
  PerturbedSurface(const Surface& base, GroundTruthPerturbation gt);
  const GroundTruthPerturbation& perturbation() const { return gt_; }
  ad::Jet evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const override;

 private:
  const Surface* base_;
  GroundTruthPerturbation gt_;
};

/// Applies the perturbation through the closed forms and samples on the
/// grid and times of `spec`.
SampledSequence4D perturb(const SynthSpec& spec, const GroundTruthPerturbation& gt);

/// Seeded warps with a in +-[0.5, 2] and log c in [-0.5, 0.5], p = 1.
std::vector<ClosedFormWarp> sample_random_warps(int n, std::uint64_t seed);

template <typename S>
std::array<S, 3> SynthSurface::raw(const S& u, const S& v, const S& t) const {
  using std::cos;
  using std::exp;
  using std::sin;
  constexpr double pi = std::numbers::pi;
  const double A = spec_.amplitude;
  const S su = sin(u);
  const S sx = su * cos(v);
  const S sy = su * sin(v);
  const S sz = cos(u);
  switch (spec_.family) {
    case Family::kBreathingEllipsoid: {
      const S spt = sin(pi * t);
      const S a = 1.0 + A * spt;
      const S b = 1.0 + (0.6 * A) * sin((2.0 * pi) * t);
      const S c = 1.0 - (0.5 * A) * (spt * spt);
      return {a * sx, b * sy, c * sz};
    }
    case Family::kBumpArticulation: {
      const S theta = pi / 4.0 + (pi / 2.0) * t;
      const S st = sin(theta);
      const S dot = (st * bump_axis_.x()) * sx + (st * bump_axis_.y()) * sy + cos(theta) * sz;
      const S r = 1.0 + A * exp((dot - 1.0) / 0.15);
      return {r * sx, r * sy, r * sz};
    }
    case Family::kTwist: {
      const S angle = (A * pi / 2.0) * (t * cos(u));
      const S ca = cos(angle);
      const S sa = sin(angle);
      const S y = (1.0 - 0.25 * std::abs(A)) * sy;
      return {ca * sx - sa * y, sa * sx + ca * y, sz};
    }
  }
  return {sx, sy, sz};
}

}  // namespace e4d
