#include "elastica4d/sequence.hpp"

#include <cmath>
#include <sstream>

namespace e4d {

void SampledSequence4D::validate() const {
  if (times.size() < 2) throw SequenceError("sequence '" + name + "': need at least two frames");
  if (times.size() != frames.size()) {
    throw SequenceError("sequence '" + name + "': " + std::to_string(times.size()) + " times but " +
                        std::to_string(frames.size()) + " frames");
  }
  if (times.front() != 0.0 || times.back() != 1.0) {
    throw SequenceError("sequence '" + name + "': times must start at 0 and end at 1");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw SequenceError("sequence '" + name + "': times not strictly increasing");
  }
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const Eigen::MatrixX3d& f = frames[k];
    if (f.rows() != grid.size()) {
      std::ostringstream os;
      os << "sequence '" << name << "': frame " << k << " has " << f.rows() << " samples, grid has " << grid.size();
      throw SequenceError(os.str());
    }
    if (!f.allFinite() || f.cwiseAbs().maxCoeff() > 1.0) {
      throw SequenceError("sequence '" + name + "': frame " + std::to_string(k) + " leaves [-1, 1]^3");
    }
  }
}

Eigen::VectorXd SampledSequence4D::flat_frame(int k) const {
  const Eigen::MatrixX3d& f = frames.at(static_cast<std::size_t>(k));
  Eigen::VectorXd out(f.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(out.data(), f.rows(), 3) = f;
  return out;
}

Eigen::MatrixX3d SampledSequence4D::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() % 3 != 0) throw SequenceError("unflatten: length is not a multiple of 3");
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(flat.data(), flat.size() / 3, 3);
}

std::vector<double> uniform_times(int count) {
  if (count < 2) throw std::invalid_argument("uniform_times: need at least two samples");
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) t[static_cast<std::size_t>(k)] = static_cast<double>(k) / (count - 1);
  t.back() = 1.0;
  return t;
}

double mean_point_error(const SampledSequence4D& a, const SampledSequence4D& b) {
  if (a.frames.size() != b.frames.size() || !(a.grid == b.grid)) {
    throw SequenceError("mean_point_error: sequences have different shapes");
  }
  double total = 0.0;
  Eigen::Index count = 0;
  for (std::size_t k = 0; k < a.frames.size(); ++k) {
    total += (a.frames[k] - b.frames[k]).rowwise().norm().sum();
    count += a.frames[k].rows();
  }
  return total / static_cast<double>(count);
}

double relative_l2_error(const SampledSequence4D& a, const SampledSequence4D& b) {
  if (a.frames.size() != b.frames.size() || !(a.grid == b.grid)) {
    throw SequenceError("relative_l2_error: sequences have different shapes");
  }
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t k = 0; k < a.frames.size(); ++k) {
    diff += (a.frames[k] - b.frames[k]).squaredNorm();
    norm += b.frames[k].squaredNorm();
  }
  return std::sqrt(diff / norm);
}

}  // namespace e4d
