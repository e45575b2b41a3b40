#pragma once

#include "elastica4d/jet.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace e4d {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Sinusoidal lift of (u, v, t). Each coordinate x contributes
/// [x, sin(2^k pi x~), cos(2^k pi x~)] for k = 0..L-1, where x~ = u/pi, v/pi
/// and t respectively. Dividing the angles by pi makes every harmonic of v
/// 2*pi-periodic.
struct EncodingConfig {
  int spatial_frequencies = 6;
  int temporal_frequencies = 4;
  bool include_raw_input = true;

  int dimension() const;
  friend bool operator==(const EncodingConfig&, const EncodingConfig&) = default;
};

/// Throws DomainError unless u in [0, pi], v in [0, 2 pi), t in [0, 1].
void check_domain(double u, double v, double t);

Eigen::RowVectorXd encode(const EncodingConfig& config, double u, double v, double t);
/// Batched encoding of B x 1 columns; tangents are propagated.
ad::Jet encode(const EncodingConfig& config, const ad::Jet& u, const ad::Jet& v, const ad::Jet& t);

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_in x fan_out
  Eigen::MatrixXd bias;    // 1 x fan_out
};

/// input layer -> `blocks` residual blocks of two SoftPlus layers -> linear head.
/// A block maps h to h + L2(act(L1(act(h)))); the head reads act(h).
class ResidualMlp {
 public:
  struct Shape {
    int input = 1;
    int width = 32;
    int blocks = 2;
    int output = 1;
    friend bool operator==(const Shape&, const Shape&) = default;
  };

  ResidualMlp() = default;
  /// Uniform initialization in +-sqrt(1 / fan_in), weights then bias, layer by layer.
  ResidualMlp(Shape shape, std::uint64_t seed);

  const Shape& shape() const { return shape_; }

  /// Parameters in declaration order: input, blocks (first, second), head;
  /// weight before bias within a layer.
  std::vector<Eigen::MatrixXd*> parameters();
  std::vector<const Eigen::MatrixXd*> parameters() const;
  std::size_t parameter_count() const;

  DenseLayer& head() { return head_; }
  std::vector<std::array<DenseLayer, 2>>& blocks() { return blocks_; }

  /// Places the parameters on the tape, in parameters() order.
  std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const;
  ad::Jet forward(std::span<const ad::Var> params, const ad::Jet& x) const;

 private:
  Shape shape_;
  DenseLayer input_;
  std::vector<std::array<DenseLayer, 2>> blocks_;
  DenseLayer head_;
};

struct DsnsArchitecture {
  int blocks = 6;
  int width = 1024;
  EncodingConfig encoding;

  static DsnsArchitecture paper() { return {}; }
  static DsnsArchitecture desk() { return {4, 128, {2, 4, true}}; }
  friend bool operator==(const DsnsArchitecture&, const DsnsArchitecture&) = default;
};

/// Continuous 4D surface f(u, v, t) -> R^3.
class DsnsModel {
 public:
  DsnsModel() : DsnsModel(DsnsArchitecture::desk(), 0) {}
  DsnsModel(const DsnsArchitecture& arch, std::uint64_t seed);
  DsnsModel(const DsnsArchitecture& arch, ResidualMlp mlp);

  const DsnsArchitecture& architecture() const { return arch_; }
  ResidualMlp& mlp() { return mlp_; }
  const ResidualMlp& mlp() const { return mlp_; }

  ad::Jet forward(std::span<const ad::Var> params, const ad::Jet& u, const ad::Jet& v,
                  const ad::Jet& t) const;

  Eigen::Vector3d evaluate(double u, double v, double t) const;
  /// Rows of (u, v, t) -> rows of points.
  Eigen::MatrixX3d evaluate(const Eigen::MatrixX3d& inputs) const;

 private:
  DsnsArchitecture arch_;
  ResidualMlp mlp_;
};

/// Time warp t -> sigmoid(mlp(t)) in (0, 1).
class WarpModel {
 public:
  static constexpr int kWidth = 32;
  static constexpr int kBlocks = 2;

  WarpModel() : WarpModel(0) {}
  explicit WarpModel(std::uint64_t seed);
  explicit WarpModel(ResidualMlp mlp);

  ResidualMlp& mlp() { return mlp_; }
  const ResidualMlp& mlp() const { return mlp_; }

  ad::Jet forward(std::span<const ad::Var> params, const ad::Jet& t) const;

  double evaluate(double t) const;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& t) const;
  /// Values and exact derivatives d/dt at the given times.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> evaluate_with_derivative(const Eigen::VectorXd& t) const;

 private:
  ResidualMlp mlp_;
};

}  // namespace e4d
