#pragma once

#include "elastica4d/sequence.hpp"

#include <Eigen/Dense>

#include <memory>
#include <stdexcept>
#include <vector>

namespace e4d {

class CurveError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear map from flattened frames (D = 3N) to k coordinates.
struct PcaBasis {
  Eigen::VectorXd mean;            // D
  Eigen::MatrixXd components;      // k x D, orthonormal rows
  Eigen::VectorXd explained;       // k variance ratios, non-increasing
  bool degenerate = false;         // all frames identical

  Eigen::Index dimension() const { return mean.size(); }
  Eigen::Index rank() const { return components.rows(); }
  Eigen::VectorXd embed(const Eigen::VectorXd& frame) const;
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& coords) const;
};

/// k = min(k_max, smallest k reaching var_target cumulative explained
/// variance). Components come from the eigenvectors of the frame Gram
/// matrix, mapped back and re-orthonormalized.
PcaBasis fit_pca(const std::vector<Eigen::VectorXd>& frames, int k_max = 10, double var_target = 0.99);
/// All frames of all sequences, pooled.
std::vector<Eigen::VectorXd> pooled_frames(const std::vector<const SampledSequence4D*>& sequences);

struct EmbeddedCurve {
  Eigen::VectorXd times;    // M, strictly increasing over [0, 1]
  Eigen::MatrixXd points;   // M x k
  std::shared_ptr<const PcaBasis> basis;

  void validate() const;
};

/// q on the same M samples as the curve; start_point keeps the inverse exact.
struct SrvfCurve {
  Eigen::VectorXd times;
  Eigen::MatrixXd values;   // M x k
  Eigen::RowVectorXd start_point;
  std::shared_ptr<const PcaBasis> basis;
};

EmbeddedCurve embed_sequence(const SampledSequence4D& seq, std::shared_ptr<const PcaBasis> basis);
/// Frames reconstructed from curve points on `grid`.
SampledSequence4D reconstruct_sequence(const EmbeddedCurve& curve, const SphereGrid& grid, const std::string& name);

/// Three-point derivative of sampled rows: central in the interior,
/// one-sided second order at the ends (first order when M = 2).
Eigen::MatrixXd sample_derivative(const Eigen::VectorXd& times, const Eigen::MatrixXd& values);

/// q = a' / sqrt(|a'|), zero where |a'| < 1e-12.
SrvfCurve srvf_map(const EmbeddedCurve& curve);
/// a(t) = a(0) + integral of q |q| by the trapezoid rule.
EmbeddedCurve srvf_invert(const SrvfCurve& q);

/// Trapezoid integral of |q1 - q2|^2. Throws CurveError on different grids.
double curve_l2(const SrvfCurve& q1, const SrvfCurve& q2);
double curve_l2(const Eigen::VectorXd& times, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Piecewise-linear value of sampled rows at each query time (clamped to the
/// sample range).
Eigen::MatrixXd interpolate_rows(const Eigen::VectorXd& times, const Eigen::MatrixXd& values,
                                 const Eigen::VectorXd& at);

}  // namespace e4d
