#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>

namespace e4d {

class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unit-sphere point for polar angle u in [0, pi] and azimuth v.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> sphere_point(Scalar u, Scalar v) {
  using std::cos;
  using std::sin;
  return {sin(u) * cos(v), sin(u) * sin(v), cos(u)};
}

/// (u, v) of a unit vector, v wrapped to [0, 2 pi).
std::pair<double, double> sphere_angles(const Eigen::Vector3d& p);

/// Equiangular midpoint grid: u_i = (i + 1/2) pi / H, v_j = 2 pi j / W.
/// No sample sits on a pole. Weights are the exact areas of the grid cells,
/// w_i = 2 sin(u_i) sin(pi / 2H) * 2 pi / W, so they sum to 4 pi.
/// Samples are stored row-major: index(i, j) = i * W + j.
class SphereGrid {
 public:
  SphereGrid() : SphereGrid(32, 32) {}
  SphereGrid(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(rows_) * cols_; }
  Eigen::Index index(int i, int j) const { return static_cast<Eigen::Index>(i) * cols_ + j; }

  double u(int i) const;
  double v(int j) const;
  double du() const;
  double dv() const;

  const Eigen::VectorXd& weights() const { return weights_; }
  /// N x 2 rows of (u, v).
  Eigen::MatrixX2d angles() const;
  /// N x 3 unit vectors.
  Eigen::MatrixX3d points() const;

  friend bool operator==(const SphereGrid& a, const SphereGrid& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_;
  }

 private:
  int rows_;
  int cols_;
  Eigen::VectorXd weights_;
};

/// Real spherical harmonics up to degree L, without the Condon-Shortley phase:
///   Y_l0  = K_l0 P_l^0(cos u)
///   Y_lm  = sqrt(2) K_lm P_l^m(cos u) cos(m v)     (m > 0)
///   Y_l-m = sqrt(2) K_lm P_l^m(cos u) sin(m v)     (m > 0)
/// with K_lm = sqrt((2l + 1)/(4 pi) (l - m)!/(l + m)!). Index of (l, m) is l^2 + l + m.
class ShBasis {
 public:
  explicit ShBasis(int max_degree = 4);

  int max_degree() const { return max_degree_; }
  int size() const { return (max_degree_ + 1) * (max_degree_ + 1); }
  static int index(int l, int m) { return l * l + l + m; }

  Eigen::RowVectorXd evaluate(double u, double v) const;

  /// Values and analytic partials d/du, d/dv at interior points (0 < u < pi).
  struct Tables {
    Eigen::MatrixXd values;
    Eigen::MatrixXd du;
    Eigen::MatrixXd dv;
  };
  Tables tabulate(const Eigen::MatrixX2d& angles) const;

 private:
  void evaluate_row(double u, double v, double* values, double* du, double* dv) const;

  int max_degree_;
};

/// Sum of coefficient-weighted basis functions at (u, v).
double sh_evaluate(const ShBasis& basis, const Eigen::VectorXd& coeffs, double u, double v);

}  // namespace e4d
