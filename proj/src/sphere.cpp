#include "elastica4d/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace e4d {

namespace {

constexpr double kPi = std::numbers::pi;

// sqrt((2l + 1)/(4 pi) (l - m)!/(l + m)!)
double normalization(int l, int m) {
  double ratio = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) ratio /= static_cast<double>(k);
  return std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * ratio);
}

}  // namespace

std::pair<double, double> sphere_angles(const Eigen::Vector3d& p) {
  const double r = p.norm();
  if (!(r > 0.0)) throw std::domain_error("sphere_angles: zero vector");
  const double u = std::acos(std::clamp(p.z() / r, -1.0, 1.0));
  double v = std::atan2(p.y(), p.x());
  if (v < 0.0) v += 2.0 * kPi;
  if (v >= 2.0 * kPi) v = 0.0;
  return {u, v};
}

SphereGrid::SphereGrid(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 2 || cols < 3) throw std::invalid_argument("sphere grid: need at least 2 x 3 samples");
  weights_.resize(size());
  const double band = 2.0 * std::sin(0.5 * du()) * dv();
  for (int i = 0; i < rows_; ++i) weights_.segment(index(i, 0), cols_).setConstant(std::sin(u(i)) * band);
}

double SphereGrid::u(int i) const { return (i + 0.5) * du(); }
double SphereGrid::v(int j) const { return j * dv(); }
double SphereGrid::du() const { return kPi / rows_; }
double SphereGrid::dv() const { return 2.0 * kPi / cols_; }

Eigen::MatrixX2d SphereGrid::angles() const {
  Eigen::MatrixX2d out(size(), 2);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) out.row(index(i, j)) << u(i), v(j);
  }
  return out;
}

Eigen::MatrixX3d SphereGrid::points() const {
  Eigen::MatrixX3d out(size(), 3);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) out.row(index(i, j)) = sphere_point(u(i), v(j)).transpose();
  }
  return out;
}

ShBasis::ShBasis(int max_degree) : max_degree_(max_degree) {
  if (max_degree < 0) throw std::invalid_argument("sh basis: negative degree");
}

void ShBasis::evaluate_row(double u, double v, double* values, double* du, double* dv) const {
  const int L = max_degree_;
  const double x = std::cos(u);
  const double s = std::sin(u);
  // p[l][m] = P_l^m(x) without the Condon-Shortley phase.
  std::vector<std::vector<double>> p(L + 1, std::vector<double>(L + 1, 0.0));
  p[0][0] = 1.0;
  for (int m = 1; m <= L; ++m) p[m][m] = p[m - 1][m - 1] * (2.0 * m - 1.0) * s;
  for (int m = 0; m < L; ++m) p[m + 1][m] = x * (2.0 * m + 1.0) * p[m][m];
  for (int m = 0; m <= L; ++m) {
    for (int l = m + 2; l <= L; ++l) {
      p[l][m] = ((2.0 * l - 1.0) * x * p[l - 1][m] - (l + m - 1.0) * p[l - 2][m]) / (l - m);
    }
  }
  for (int l = 0; l <= L; ++l) {
    for (int m = 0; m <= l; ++m) {
      const double k = normalization(l, m) * (m == 0 ? 1.0 : std::numbers::sqrt2);
      const double value = k * p[l][m];
      double slope = 0.0;
      if (du != nullptr) {
        const double lower = l - 1 >= m ? p[l - 1][m] : 0.0;
        slope = k * (l * x * p[l][m] - (l + m) * lower) / s;
      }
      if (m == 0) {
        values[index(l, 0)] = value;
        if (du != nullptr) {
          du[index(l, 0)] = slope;
          dv[index(l, 0)] = 0.0;
        }
        continue;
      }
      const double c = std::cos(m * v);
      const double sn = std::sin(m * v);
      values[index(l, m)] = value * c;
      values[index(l, -m)] = value * sn;
      if (du != nullptr) {
        du[index(l, m)] = slope * c;
        du[index(l, -m)] = slope * sn;
        dv[index(l, m)] = -m * value * sn;
        dv[index(l, -m)] = m * value * c;
      }
    }
  }
}

Eigen::RowVectorXd ShBasis::evaluate(double u, double v) const {
  Eigen::RowVectorXd out(size());
  evaluate_row(u, v, out.data(), nullptr, nullptr);
  return out;
}

ShBasis::Tables ShBasis::tabulate(const Eigen::MatrixX2d& angles) const {
  const Eigen::Index n = angles.rows();
  // Row-major scratch so each sample writes a contiguous row.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor values(n, size()), du(n, size()), dv(n, size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const double u = angles(r, 0);
    if (!(u > 0.0 && u < kPi)) throw std::domain_error("sh basis: derivative tables need 0 < u < pi");
    evaluate_row(u, angles(r, 1), values.row(r).data(), du.row(r).data(), dv.row(r).data());
  }
  return {values, du, dv};
}

double sh_evaluate(const ShBasis& basis, const Eigen::VectorXd& coeffs, double u, double v) {
  if (coeffs.size() != basis.size()) throw std::invalid_argument("sh_evaluate: coefficient count mismatch");
  return basis.evaluate(u, v).dot(coeffs);
}

}  // namespace e4d
