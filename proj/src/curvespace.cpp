#include "elastica4d/curvespace.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace e4d {

Eigen::VectorXd PcaBasis::embed(const Eigen::VectorXd& frame) const {
  if (frame.size() != mean.size()) {
    std::ostringstream os;
    os << "pca: frame has dimension " << frame.size() << ", basis expects " << mean.size();
    throw CurveError(os.str());
  }
  return components * (frame - mean);
}

Eigen::VectorXd PcaBasis::reconstruct(const Eigen::VectorXd& coords) const {
  if (coords.size() != rank()) throw CurveError("pca: coordinate count does not match the basis rank");
  return mean + components.transpose() * coords;
}

PcaBasis fit_pca(const std::vector<Eigen::VectorXd>& frames, int k_max, double var_target) {
  if (frames.size() < 2) throw CurveError("fit_pca: need at least two frames");
  if (k_max < 1) throw CurveError("fit_pca: k_max must be positive");
  if (!(var_target > 0.0 && var_target <= 1.0)) throw CurveError("fit_pca: var_target must lie in (0, 1]");
  const Eigen::Index n = static_cast<Eigen::Index>(frames.size());
  const Eigen::Index d = frames.front().size();
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (frames[i].size() != d) throw CurveError("fit_pca: frames have different dimensions");
    x.row(i) = frames[i].transpose();
  }
  PcaBasis basis;
  basis.mean = x.colwise().mean().transpose();
  x.rowwise() -= basis.mean.transpose();

  const Eigen::MatrixXd gram = x * x.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd lambda = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double total = lambda.sum();
  const double scale = std::max(1.0, basis.mean.squaredNorm());
  if (!(total > 1e-24 * scale * static_cast<double>(n))) {
    basis.components = Eigen::MatrixXd::Zero(1, d);
    basis.components(0, 0) = 1.0;
    basis.explained = Eigen::VectorXd::Zero(1);
    basis.degenerate = true;
    return basis;
  }

  Eigen::Index usable = 0;
  while (usable < lambda.size() && lambda(usable) > 1e-14 * lambda(0)) ++usable;
  Eigen::Index k = 0;
  double cumulative = 0.0;
  while (k < std::min<Eigen::Index>(k_max, usable)) {
    cumulative += lambda(k) / total;
    ++k;
    if (cumulative >= var_target) break;
  }

  Eigen::MatrixXd c(d, k);
  for (Eigen::Index i = 0; i < k; ++i) c.col(i) = x.transpose() * vectors.col(i) / std::sqrt(lambda(i));
  // Round-off in the Gram route loses orthogonality for small eigenvalues.
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (q.col(i).dot(c.col(i)) < 0.0) q.col(i) *= -1.0;
  }
  basis.components = q.transpose();
  basis.explained = lambda.head(k) / total;
  return basis;
}

std::vector<Eigen::VectorXd> pooled_frames(const std::vector<const SampledSequence4D*>& sequences) {
  std::vector<Eigen::VectorXd> out;
  for (const SampledSequence4D* s : sequences) {
    for (int k = 0; k < s->frame_count(); ++k) out.push_back(s->flat_frame(k));
  }
  return out;
}

void EmbeddedCurve::validate() const {
  if (times.size() < 2 || times.size() != points.rows()) throw CurveError("curve: need at least two samples");
  if (times(0) != 0.0 || times(times.size() - 1) != 1.0) throw CurveError("curve: times must span [0, 1]");
  for (Eigen::Index m = 1; m < times.size(); ++m) {
    if (!(times(m) > times(m - 1))) throw CurveError("curve: times must be strictly increasing");
  }
}

EmbeddedCurve embed_sequence(const SampledSequence4D& seq, std::shared_ptr<const PcaBasis> basis) {
  EmbeddedCurve curve;
  curve.times = Eigen::Map<const Eigen::VectorXd>(seq.times.data(), static_cast<Eigen::Index>(seq.times.size()));
  curve.points.resize(seq.frame_count(), basis->rank());
  for (int k = 0; k < seq.frame_count(); ++k) curve.points.row(k) = basis->embed(seq.flat_frame(k)).transpose();
  curve.basis = std::move(basis);
  return curve;
}

SampledSequence4D reconstruct_sequence(const EmbeddedCurve& curve, const SphereGrid& grid, const std::string& name) {
  if (!curve.basis) throw CurveError("reconstruct_sequence: curve has no basis");
  if (curve.basis->dimension() != 3 * grid.size()) throw CurveError("reconstruct_sequence: grid does not match basis");
  SampledSequence4D seq{name, grid, {}, {}};
  for (Eigen::Index m = 0; m < curve.times.size(); ++m) {
    seq.times.push_back(curve.times(m));
    seq.frames.push_back(SampledSequence4D::unflatten(curve.basis->reconstruct(curve.points.row(m).transpose())));
  }
  return seq;
}

Eigen::MatrixXd sample_derivative(const Eigen::VectorXd& t, const Eigen::MatrixXd& y) {
  const Eigen::Index m = t.size();
  if (m < 2 || y.rows() != m) throw CurveError("sample_derivative: need at least two samples");
  Eigen::MatrixXd d(m, y.cols());
  if (m == 2) {
    d.row(0) = d.row(1) = (y.row(1) - y.row(0)) / (t(1) - t(0));
    return d;
  }
  // Derivative of the quadratic through (t0, t1, t2), taken at t0, t1 or t2.
  const auto three_point = [&](Eigen::Index i0, Eigen::Index at) {
    const double x0 = t(i0), x1 = t(i0 + 1), x2 = t(i0 + 2), x = t(at);
    const double c0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
    const double c1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
    const double c2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
    return Eigen::RowVectorXd(c0 * y.row(i0) + c1 * y.row(i0 + 1) + c2 * y.row(i0 + 2));
  };
  d.row(0) = three_point(0, 0);
  for (Eigen::Index i = 1; i + 1 < m; ++i) d.row(i) = three_point(i - 1, i);
  d.row(m - 1) = three_point(m - 3, m - 1);
  return d;
}

SrvfCurve srvf_map(const EmbeddedCurve& curve) {
  curve.validate();
  const Eigen::MatrixXd velocity = sample_derivative(curve.times, curve.points);
  SrvfCurve q{curve.times, Eigen::MatrixXd::Zero(velocity.rows(), velocity.cols()), curve.points.row(0),
              curve.basis};
  for (Eigen::Index m = 0; m < velocity.rows(); ++m) {
    const double speed = velocity.row(m).norm();
    if (speed >= 1e-12) q.values.row(m) = velocity.row(m) / std::sqrt(speed);
  }
  return q;
}

EmbeddedCurve srvf_invert(const SrvfCurve& q) {
  const Eigen::Index m = q.times.size();
  EmbeddedCurve curve{q.times, Eigen::MatrixXd(m, q.values.cols()), q.basis};
  curve.points.row(0) = q.start_point;
  for (Eigen::Index i = 1; i < m; ++i) {
    const Eigen::RowVectorXd a = q.values.row(i - 1) * q.values.row(i - 1).norm();
    const Eigen::RowVectorXd b = q.values.row(i) * q.values.row(i).norm();
    curve.points.row(i) = curve.points.row(i - 1) + 0.5 * (q.times(i) - q.times(i - 1)) * (a + b);
  }
  return curve;
}

double curve_l2(const Eigen::VectorXd& t, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != t.size() || b.rows() != t.size() || a.cols() != b.cols()) {
    throw CurveError("curve_l2: sample shapes differ");
  }
  const Eigen::VectorXd f = (a - b).rowwise().squaredNorm();
  double total = 0.0;
  for (Eigen::Index i = 1; i < t.size(); ++i) total += 0.5 * (t(i) - t(i - 1)) * (f(i) + f(i - 1));
  return total;
}

double curve_l2(const SrvfCurve& q1, const SrvfCurve& q2) {
  if (q1.times.size() != q2.times.size() || q1.times != q2.times) throw CurveError("curve_l2: time grids differ");
  if (q1.basis && q2.basis && q1.basis != q2.basis) throw CurveError("curve_l2: curves live in different bases");
  return curve_l2(q1.times, q1.values, q2.values);
}

Eigen::MatrixXd interpolate_rows(const Eigen::VectorXd& t, const Eigen::MatrixXd& y, const Eigen::VectorXd& at) {
  if (t.size() < 2 || y.rows() != t.size()) throw CurveError("interpolate_rows: need at least two samples");
  Eigen::MatrixXd out(at.size(), y.cols());
  const double* begin = t.data();
  const double* end = t.data() + t.size();
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double x = std::clamp(at(i), t(0), t(t.size() - 1));
    Eigen::Index hi = std::upper_bound(begin, end, x) - begin;
    hi = std::clamp<Eigen::Index>(hi, 1, t.size() - 1);
    const double w = (x - t(hi - 1)) / (t(hi) - t(hi - 1));
    out.row(i) = (1.0 - w) * y.row(hi - 1) + w * y.row(hi);
  }
  return out;
}

}  // namespace e4d
