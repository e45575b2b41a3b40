#pragma once

#include "elastica4d/sphere.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace e4d {

class SequenceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Discrete 4D surface: one N x 3 point block per time sample, rows in
/// grid order. Stored coordinates are normalized; the raw geometry is
/// points * scale + offset.
struct SampledSequence4D {
  std::string name;
  SphereGrid grid;
  std::vector<double> times;
  std::vector<Eigen::MatrixX3d> frames;
  double scale = 1.0;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();

  int frame_count() const { return static_cast<int>(frames.size()); }

  /// Throws SequenceError if times are not strictly increasing from 0 to 1,
  /// frame shapes disagree with the grid, or a coordinate leaves [-1, 1].
  void validate() const;

  /// Frame k flattened to a D = 3N vector (x, y, z per sample).
  Eigen::VectorXd flat_frame(int k) const;
  static Eigen::MatrixX3d unflatten(const Eigen::VectorXd& flat);
};

/// Uniform time samples 0, 1/(K-1), ..., 1.
std::vector<double> uniform_times(int count);

/// Mean over frames and samples of the pointwise Euclidean distance.
double mean_point_error(const SampledSequence4D& a, const SampledSequence4D& b);
/// |a - b| / |b| over all frames.
double relative_l2_error(const SampledSequence4D& a, const SampledSequence4D& b);

}  // namespace e4d
