#include "elastica4d/spatialreg.hpp"

#include "elastica4d/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace e4d {

namespace {

// Keeps acos away from exact poles: u stays >= ~1e-7.
constexpr double kPoleClamp = 5e-15;

Eigen::Matrix3d rotation_from_cross_covariance(const Eigen::Matrix3d& a) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) <= 1e-12 * s(0)) {
    std::ostringstream os;
    os << "estimate_rotation: cross-covariance is rank deficient (singular values " << s.transpose() << ")";
    throw DegenerateFieldError(os.str());
  }
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  return v * d.asDiagonal() * u.transpose();
}

// sum_i w_i q2_i q1_i^T
Eigen::Matrix3d cross_covariance(const Eigen::VectorXd& w, const Eigen::MatrixX3d& q1, const Eigen::MatrixX3d& q2) {
  return q2.transpose() * w.asDiagonal() * q1;
}

// Everything that stays fixed while gamma and R change.
struct LossSetup {
  const Surface& tgt;
  Eigen::VectorXd weights;
  ShBasis::Tables tables;
  std::vector<double> frames;
  std::vector<Eigen::MatrixX3d> q1;
};

LossSetup make_setup(const Surface& src, const Surface& tgt, const SpatialRegConfig& cfg, const ShBasis& basis) {
  if (cfg.frames.empty()) throw std::invalid_argument("register_spatial: no reference frames");
  LossSetup setup{tgt, cfg.grid.weights(), basis.tabulate(cfg.grid.angles()), cfg.frames, {}};
  for (double t : cfg.frames) setup.q1.push_back(srnf_map(src, t, cfg.grid).values);
  return setup;
}

struct Evaluation {
  double loss = 0.0;
  Eigen::MatrixXd gradient;            // d loss / d coeffs when requested
  std::vector<Eigen::MatrixX3d> q2;    // SRNF of tgt o gamma per frame
};

Evaluation evaluate(const LossSetup& setup, const Eigen::Matrix3d& rotation, const Eigen::MatrixXd& coeffs,
                    bool with_gradient) {
  ad::Tape tape;
  const ad::Var a = tape.leaf(coeffs, with_gradient);
  const DiffeoAngles angles = diffeo_angles(tape.leaf(setup.tables.values), tape.leaf(setup.tables.du),
                                            tape.leaf(setup.tables.dv), a, true);
  const ad::Var weights = tape.leaf(setup.weights);
  const ad::Var rt = tape.leaf(Eigen::MatrixXd(rotation.transpose()));
  const Eigen::Index n = setup.weights.size();
  Evaluation out;
  std::vector<ad::Var> losses;
  for (std::size_t k = 0; k < setup.frames.size(); ++k) {
    const ad::Var t = tape.leaf(Eigen::MatrixXd::Constant(n, 1, setup.frames[k]));
    const ad::Jet f = setup.tgt.evaluate(angles.u, angles.v, t);
    const ad::Var q = srnf_rows(ad::cross3(f.tangents[0], f.tangents[1]));
    out.q2.push_back(q.value());
    const ad::Var diff = tape.leaf(setup.q1[k]) - ad::matmul(q, rt);
    losses.push_back(ad::sum(weights * ad::row_sum(ad::square(diff))));
  }
  ad::Var total = losses.front();
  for (std::size_t k = 1; k < losses.size(); ++k) total = total + losses[k];
  total = total / static_cast<double>(losses.size());
  out.loss = total.scalar();
  if (with_gradient) {
    tape.backward(total);
    out.gradient = a.grad();
  }
  return out;
}

Eigen::Matrix3d pooled_rotation(const LossSetup& setup, const std::vector<Eigen::MatrixX3d>& q2) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  for (std::size_t k = 0; k < q2.size(); ++k) a += cross_covariance(setup.weights, setup.q1[k], q2[k]);
  return rotation_from_cross_covariance(a);
}

void check_finite(double loss, const std::vector<double>& trace) {
  if (!std::isfinite(loss)) throw RegistrationError("register_spatial: loss became non-finite", trace);
}

}  // namespace

Eigen::Matrix3d estimate_rotation(const SrnfField& q1, const SrnfField& q2) {
  if (!(q1.grid == q2.grid)) throw GridMismatch("estimate_rotation: fields live on different grids");
  return rotation_from_cross_covariance(cross_covariance(q1.grid.weights(), q1.values, q2.values));
}

SphDiffeo::SphDiffeo(int max_degree) : basis_(max_degree) {
  if (max_degree < 1) throw std::invalid_argument("sph diffeo: degree must be at least one");
  // x = sin u cos v = Y_{1,1} / k, y = Y_{1,-1} / k, z = Y_{1,0} / k.
  const double inv_k = 1.0 / std::sqrt(3.0 / (4.0 * std::numbers::pi));
  coeffs_ = Eigen::MatrixXd::Zero(basis_.size(), 3);
  coeffs_(ShBasis::index(1, 1), 0) = inv_k;
  coeffs_(ShBasis::index(1, -1), 1) = inv_k;
  coeffs_(ShBasis::index(1, 0), 2) = inv_k;
}

Eigen::MatrixX3d SphDiffeo::apply(const Eigen::MatrixX2d& angles) const {
  Eigen::MatrixX3d out(angles.rows(), 3);
  for (Eigen::Index r = 0; r < angles.rows(); ++r) {
    out.row(r) = (basis_.evaluate(angles(r, 0), angles(r, 1)) * coeffs_).normalized();
  }
  return out;
}

Eigen::Vector3d SphDiffeo::apply(double u, double v) const {
  return (basis_.evaluate(u, v) * coeffs_).normalized().transpose();
}

int SphDiffeo::fold_count(const SphereGrid& grid) const {
  const ShBasis::Tables t = basis_.tabulate(grid.angles());
  const Eigen::MatrixX3d g = t.values * coeffs_;
  const Eigen::MatrixX3d gu = t.du * coeffs_;
  const Eigen::MatrixX3d gv = t.dv * coeffs_;
  int folds = 0;
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    if (g.row(r).dot(gu.row(r).cross(gv.row(r))) <= 0.0) ++folds;
  }
  return folds;
}

DiffeoAngles diffeo_angles(ad::Var values, ad::Var du, ad::Var dv, ad::Var coeffs, bool with_tangents) {
  const ad::Jet y = with_tangents ? ad::Jet(values, {du, dv}) : ad::Jet(values);
  const ad::Jet p = ad::normalize3(ad::matmul(y, coeffs));
  return {ad::acos(ad::slice(p, 2, 1), kPoleClamp), ad::atan2(ad::slice(p, 1, 1), ad::slice(p, 0, 1))};
}

AlignedSurface::AlignedSurface(const Surface& base, const Eigen::Matrix3d& rotation, SphDiffeo diffeo)
    : base_(&base), rotation_(rotation), diffeo_(std::move(diffeo)) {}

ad::Jet AlignedSurface::evaluate(const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) const {
  ad::Tape& tape = u.tape();
  const Eigen::Index rows = u.value.rows();
  Eigen::MatrixX2d at(rows, 2);
  at.col(0) = u.value.value().col(0);
  at.col(1) = v.value.value().col(0);
  const ShBasis::Tables tables = diffeo_.basis().tabulate(at);
  const Eigen::MatrixXd& a = diffeo_.coeffs();

  ad::Jet g(tape.leaf(tables.values * a));
  const std::size_t directions = std::max(u.directions(), v.directions());
  if (directions > 0) {
    const ad::Var gu = tape.leaf(tables.du * a);
    const ad::Var gv = tape.leaf(tables.dv * a);
    for (std::size_t k = 0; k < directions; ++k) {
      ad::Var d = tape.leaf(Eigen::MatrixXd::Zero(rows, 3));
      if (!u.is_constant()) d = d + gu * u.tangents[k];
      if (!v.is_constant()) d = d + gv * v.tangents[k];
      g.tangents.push_back(d);
    }
  }
  const ad::Jet p = ad::normalize3(g);
  const ad::Jet u2 = ad::acos(ad::slice(p, 2, 1), kPoleClamp);
  const ad::Jet v2 = ad::atan2(ad::slice(p, 1, 1), ad::slice(p, 0, 1));
  return ad::matmul(base_->evaluate(u2, v2, t), tape.leaf(Eigen::MatrixXd(rotation_.transpose())));
}

Eigen::Vector3d apply_diffeo(const DsnsModel& model, const SphDiffeo& diffeo, double u, double v, double t) {
  const auto [u2, v2] = sphere_angles(diffeo.apply(u, v));
  return model.evaluate(std::max(u2, 1e-7), v2, t);
}

double spatial_loss(const Surface& src, const Surface& tgt, const Eigen::Matrix3d& rotation, const SphDiffeo& diffeo,
                    const SpatialRegConfig& cfg) {
  const LossSetup setup = make_setup(src, tgt, cfg, diffeo.basis());
  return evaluate(setup, rotation, diffeo.coeffs(), false).loss;
}

SpatialRegResult register_spatial(const Surface& src, const Surface& tgt, const SpatialRegConfig& cfg) {
  if (cfg.iterations < 0 || cfg.inner_steps < 0) throw std::invalid_argument("register_spatial: negative step counts");
  SpatialRegResult result;
  result.diffeo = SphDiffeo(cfg.max_degree);
  const LossSetup setup = make_setup(src, tgt, cfg, result.diffeo.basis());

  Evaluation current = evaluate(setup, Eigen::Matrix3d::Identity(), result.diffeo.coeffs(), false);
  result.initial_loss = current.loss;
  check_finite(current.loss, result.loss_trace);
  double scale = 0.0;
  for (const auto& q : setup.q1) scale += setup.weights.dot(q.rowwise().squaredNorm());
  scale /= static_cast<double>(setup.q1.size());

  result.rotation = pooled_rotation(setup, current.q2);
  current = evaluate(setup, result.rotation, result.diffeo.coeffs(), false);
  check_finite(current.loss, result.loss_trace);
  result.loss_trace.push_back(current.loss);

  RmsProp optimizer({cfg.learning_rate, cfg.momentum, 1e-8});
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    if (current.loss <= 1e-14 * scale) {
      result.converged = true;
      break;
    }
    // (b) descend on the coefficients with R fixed, keeping the best iterate.
    Eigen::MatrixXd coeffs = result.diffeo.coeffs();
    Eigen::MatrixXd best = coeffs;
    double best_loss = current.loss;
    for (int step = 0; step <= cfg.inner_steps; ++step) {
      const Evaluation e = evaluate(setup, result.rotation, coeffs, step < cfg.inner_steps);
      check_finite(e.loss, result.loss_trace);
      if (e.loss < best_loss) {
        best_loss = e.loss;
        best = coeffs;
      }
      if (step == cfg.inner_steps) break;
      const std::vector<Eigen::MatrixXd*> params{&coeffs};
      const std::vector<Eigen::MatrixXd> grads{e.gradient};
      optimizer.step(params, grads);
    }
    result.diffeo.coeffs() = best;

    // (a) optimal rotation for the new gamma; never worse than the old one.
    current = evaluate(setup, result.rotation, best, false);
    const Eigen::Matrix3d candidate = pooled_rotation(setup, current.q2);
    const Evaluation rotated = evaluate(setup, candidate, best, false);
    if (rotated.loss <= current.loss) {
      result.rotation = candidate;
      current = rotated;
    }
    const double previous = result.loss_trace.back();
    result.loss_trace.push_back(current.loss);
    if (previous - current.loss < cfg.tolerance * previous) {
      result.converged = true;
      break;
    }
  }
  result.fold_count = result.diffeo.fold_count(cfg.grid);
  return result;
}

SpatialRegResult register_spatial(const DsnsModel& src, const DsnsModel& tgt, const SpatialRegConfig& cfg) {
  return register_spatial(DsnsSurface(src), DsnsSurface(tgt), cfg);
}

}  // namespace e4d
