#include "elastica4d/synth.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace e4d {

namespace {

constexpr double kPi = std::numbers::pi;
// Keeps acos away from exact poles: u stays >= ~1e-7.
constexpr double kPoleClamp = 5e-15;

double family_scale(Family family, double amplitude) {
  switch (family) {
    case Family::kBreathingEllipsoid:
      return amplitude >= 0.0 ? 1.0 + amplitude : 1.0 - 0.6 * amplitude;
    case Family::kBumpArticulation:
      return 1.0 + amplitude;
    case Family::kTwist:
      return 1.0;
  }
  return 1.0;
}

void check_amplitude(Family family, double amplitude) {
  bool ok = std::isfinite(amplitude);
  switch (family) {
    case Family::kBreathingEllipsoid: ok = ok && std::abs(amplitude) <= 0.5; break;
    case Family::kBumpArticulation: ok = ok && amplitude >= 0.0 && amplitude <= 0.5; break;
    case Family::kTwist: ok = ok && std::abs(amplitude) <= 1.0; break;
  }
  if (!ok) {
    throw std::invalid_argument("synth: amplitude " + std::to_string(amplitude) + " outside the bound of family " +
                                family_name(family));
  }
}

ad::Var constant_matrix(ad::Tape& tape, const Eigen::Matrix3d& m) { return tape.leaf(Eigen::MatrixXd(m)); }

}  // namespace

std::string family_name(Family family) {
  switch (family) {
    case Family::kBreathingEllipsoid: return "breathing-ellipsoid";
    case Family::kBumpArticulation: return "bump-articulation";
    case Family::kTwist: return "twist";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  for (Family f : {Family::kBreathingEllipsoid, Family::kBumpArticulation, Family::kTwist}) {
    if (family_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown surface family '" + name + "'");
}

SynthSurface::SynthSurface(const SynthSpec& spec) : spec_(spec) {
  check_amplitude(spec.family, spec.amplitude);
  scale_ = family_scale(spec.family, spec.amplitude);
  std::mt19937_64 rng(spec.seed);
  const double azimuth = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng);
  bump_axis_ = {std::cos(azimuth), std::sin(azimuth), 0.0};
}

Eigen::Vector3d SynthSurface::point(double u, double v, double t) const {
  const auto p = raw(u, v, t);
  return Eigen::Vector3d(p[0], p[1], p[2]) / scale_;
}

Eigen::Vector3d SynthSurface::normal(double u, double v, double t) const {
  Eigen::MatrixX2d at(1, 2);
  at << u, v;
  return surface_normals(*this, at, t).row(0).transpose();
}

ad::Jet SynthSurface::evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const {
  const auto p = raw(u, v, t);
  const double inv = 1.0 / scale_;
  const ad::Jet parts[] = {p[0] * inv, p[1] * inv, p[2] * inv};
  return ad::concat(parts);
}

SampledSequence4D generate(const SynthSpec& spec) {
  const SynthSurface surface(spec);
  SampledSequence4D seq = sample_sequence(surface, spec.grid, spec.times,
                                          spec.name.empty() ? family_name(spec.family) : spec.name);
  seq.scale = surface.scale();
  seq.offset.setZero();
  return seq;
}

void ClosedFormWarp::validate() const {
  if (!std::isfinite(a) || !(c > 0.0) || !std::isfinite(c) || !(power > 0.0) || !std::isfinite(power)) {
    throw std::invalid_argument("closed-form warp: need finite a, c > 0, p > 0");
  }
}

double ClosedFormWarp::operator()(double t) const {
  const double s = std::pow(t, power);
  const double m = s / (s + c * (1.0 - s));
  if (std::abs(a) < 1e-12) return m;
  return std::expm1(a * m) / std::expm1(a);
}

double ClosedFormWarp::derivative(double t) const {
  const double s = std::pow(t, power);
  const double ds = power == 1.0 ? 1.0 : power * std::pow(t, power - 1.0);
  const double den = s + c * (1.0 - s);
  const double m = s / den;
  const double dm = c / (den * den);
  const double de = std::abs(a) < 1e-12 ? 1.0 : a * std::exp(a * m) / std::expm1(a);
  return de * dm * ds;
}

double ClosedFormWarp::inverse(double z) const {
  const double m = std::abs(a) < 1e-12 ? z : std::log1p(z * std::expm1(a)) / a;
  const double s = c * m / (1.0 - m + c * m);
  return std::pow(s, 1.0 / power);
}

Eigen::Vector3d SquashDiffeo::operator()(const Eigen::Vector3d& s) const {
  return rotation * (s + c * Eigen::Vector3d::UnitZ()).normalized();
}

Eigen::Vector3d SquashDiffeo::inverse(const Eigen::Vector3d& p) const {
  // Solve normalize(s + c e3) = q for unit s: s = lambda q - c e3 with |s| = 1.
  const Eigen::Vector3d q = (rotation.transpose() * p).normalized();
  const double b = c * q.z();
  const double lambda = b + std::sqrt(b * b - c * c + 1.0);
  return (lambda * q - c * Eigen::Vector3d::UnitZ()).normalized();
}

Eigen::Matrix3d random_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
  q.normalize();
  return q.toRotationMatrix();
}

GroundTruthPerturbation random_perturbation(std::uint64_t seed, double max_squash) {
  std::mt19937_64 rng(seed);
  GroundTruthPerturbation gt;
  gt.seed = seed;
  gt.rotation = random_rotation(rng());
  gt.sphere_diffeo.rotation = random_rotation(rng());
  gt.sphere_diffeo.c = std::uniform_real_distribution<double>(-max_squash, max_squash)(rng);
  gt.time_warp = sample_random_warps(1, rng()).front();
  return gt;
}

std::vector<ClosedFormWarp> sample_random_warps(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_random_warps: n must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> magnitude(0.5, 2.0);
  std::uniform_real_distribution<double> log_c(-0.5, 0.5);
  std::bernoulli_distribution sign;
  std::vector<ClosedFormWarp> warps;
  warps.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    ClosedFormWarp w;
    w.a = (sign(rng) ? 1.0 : -1.0) * magnitude(rng);
    w.c = std::exp(log_c(rng));
    warps.push_back(w);
  }
  return warps;
}

PerturbedSurface::PerturbedSurface(const Surface& base, GroundTruthPerturbation gt) : base_(&base), gt_(std::move(gt)) {
  gt_.time_warp.validate();
  if (!(std::abs(gt_.sphere_diffeo.c) < 1.0)) throw std::invalid_argument("squash diffeo: need |c| < 1");
}

ad::Jet PerturbedSurface::evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const {
  ad::Tape& tape = u.tape();
  const ad::Jet su = ad::sin(u);
  const ad::Jet s[] = {su * ad::cos(v), su * ad::sin(v), ad::cos(u) + gt_.sphere_diffeo.c};
  // Row vectors: p R^T applies R to each sample.
  const ad::Var rt = constant_matrix(tape, gt_.sphere_diffeo.rotation.transpose());
  const ad::Jet p = ad::matmul(ad::normalize3(ad::concat(s)), rt);
  const ad::Jet u2 = ad::acos(ad::slice(p, 2, 1), kPoleClamp);
  const ad::Jet v2 = ad::atan2(ad::slice(p, 1, 1), ad::slice(p, 0, 1));

  // The warp is evaluated in closed form and chained onto the tangents of t.
  const Eigen::MatrixXd& tv = t.value.value();
  Eigen::MatrixXd warped(tv.rows(), 1);
  Eigen::MatrixXd slope(tv.rows(), 1);
  for (Eigen::Index r = 0; r < tv.rows(); ++r) {
    warped(r, 0) = std::clamp(gt_.time_warp(tv(r, 0)), 0.0, 1.0);
    slope(r, 0) = gt_.time_warp.derivative(tv(r, 0));
  }
  ad::Jet t2(tape.leaf(warped));
  if (!t.is_constant()) {
    const ad::Var k = tape.leaf(slope);
    for (const ad::Var& d : t.tangents) t2.tangents.push_back(k * d);
  }

  const ad::Var rot = constant_matrix(tape, gt_.rotation.transpose());
  return ad::matmul(base_->evaluate(u2, v2, t2), rot);
}

SampledSequence4D perturb(const SynthSpec& spec, const GroundTruthPerturbation& gt) {
  const SynthSurface base(spec);
  const PerturbedSurface surface(base, gt);
  SampledSequence4D seq = sample_sequence(surface, spec.grid, spec.times,
                                          (spec.name.empty() ? family_name(spec.family) : spec.name) + "-perturbed");
  seq.scale = base.scale();
  seq.offset.setZero();
  return seq;
}

}  // namespace e4d
