#pragma once

#include "elastica4d/networks.hpp"
#include "elastica4d/sequence.hpp"
#include "elastica4d/surface.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace e4d {

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, int epoch, double learning_rate)
      : std::runtime_error(what), epoch_(epoch), learning_rate_(learning_rate) {}
  int epoch() const { return epoch_; }
  double learning_rate() const { return learning_rate_; }

 private:
  int epoch_;
  double learning_rate_;
};

/// One epoch is one optimizer step on a minibatch. Minibatches are consecutive
/// slices of a seeded permutation of all (sample, frame) pairs; the
/// permutation is redrawn once it is used up. A minibatch is kept for
/// `resample_every` epochs before the next slice is taken.
struct FitConfig {
  int epochs = 10000;
  int batch_size = 4096;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  /// Learning rate reached at the last epoch by cosine decay; <= 0 keeps it constant.
  double final_learning_rate = 0.0;
  int resample_every = 1;
  std::uint64_t seed = 0;
  DsnsArchitecture architecture = DsnsArchitecture::desk();
  /// Called every `report_every` epochs with (epoch, loss); 0 disables.
  int report_every = 0;
  std::function<void(int, double)> report;

  /// Single-core preset: 10000 epochs, batch 1024, learning rate 2e-3
  /// cosine-decayed to 1e-6, DsnsArchitecture::desk().
  static FitConfig desk();
  /// 50000 epochs, batch 80000, constant 1e-4, DsnsArchitecture::paper().
  static FitConfig paper();
};

struct FitResult {
  DsnsModel model;
  std::vector<double> loss_history;
};

FitResult fit_dsns(const SampledSequence4D& seq, const FitConfig& config);
/// Continues training an existing model.
FitResult fit_dsns(const SampledSequence4D& seq, const FitConfig& config, DsnsModel model);

struct BatchLoss {
  double loss;
  std::vector<Eigen::MatrixXd> gradients;  // in ResidualMlp::parameters() order
};

/// (1/B) sum |f(s_i, t_j) - p_ij|^2 over the batch and its parameter gradient.
/// Entries of `pairs` index frame * N + sample.
BatchLoss fit_batch_loss(const DsnsModel& model, const SampledSequence4D& seq, std::span<const Eigen::Index> pairs);

/// Mean squared error over every sample of every frame.
double fit_loss(const DsnsModel& model, const SampledSequence4D& seq);

SampledSequence4D evaluate_sequence(const DsnsModel& model, const SphereGrid& grid, const std::vector<double>& times);

/// Raw partials (f_u, f_v, f_t); the 1/sin(u) factor is not applied.
/// Throws PoleError at u in {0, pi}.
struct Jacobian {
  Eigen::Vector3d du;
  Eigen::Vector3d dv;
  Eigen::Vector3d dt;
};
Jacobian surface_jacobian(const DsnsModel& model, double u, double v, double t);
SurfacePartials surface_jacobian(const DsnsModel& model, const Eigen::MatrixX2d& angles, double t);

/// n = f_u x f_v, unnormalized.
Eigen::Vector3d normal_field(const DsnsModel& model, double u, double v, double t);
Eigen::MatrixX3d normal_field(const DsnsModel& model, const Eigen::MatrixX2d& angles, double t);

}  // namespace e4d
