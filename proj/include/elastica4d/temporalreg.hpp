#pragma once

#include "elastica4d/curvespace.hpp"
#include "elastica4d/networks.hpp"
#include "elastica4d/synth.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace e4d {

class TemporalRegError : public std::runtime_error {
 public:
  TemporalRegError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

class PretrainError : public std::runtime_error {
 public:
  PretrainError(const std::string& what, double achieved) : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

/// A map [0, 1] -> [0, 1]: a warp network read through the affine anchoring
/// (z(t) - z(0)) / (z(1) - z(0)), or strictly increasing samples joined
/// linearly.
class TimeWarp {
 public:
  /// Identity, tabulated on {0, 1}.
  TimeWarp();
  static TimeWarp neural(WarpModel model);
  static TimeWarp tabulated(Eigen::VectorXd times, Eigen::VectorXd values);
  static TimeWarp tabulate(const ClosedFormWarp& warp, int samples = 1001);

  bool is_neural() const { return model_.has_value(); }
  const WarpModel& model() const;
  const Eigen::VectorXd& times() const { return times_; }
  const Eigen::VectorXd& values() const { return values_; }

  double operator()(double t) const;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& t) const;
  /// d/dt of the anchored warp (one-sided slopes for tabulated warps).
  Eigen::VectorXd derivative(const Eigen::VectorXd& t) const;
  /// Samples of the inverse: swaps the axes of a tabulated warp. Throws
  /// std::invalid_argument unless strictly increasing.
  TimeWarp inverse() const;

 private:
  std::optional<WarpModel> model_;
  Eigen::VectorXd times_;
  Eigen::VectorXd values_;
};

struct PretrainConfig {
  int epochs = 4000;
  double learning_rate = 1e-2;       // cosine decay to final_learning_rate
  double final_learning_rate = 1e-5;
  double tolerance = 0.01;  // sup |z(t) - t| on 101 samples
  int batch = 64;
  std::uint64_t seed = 0;
};

/// Fits z(t) = t by cross-entropy on seeded uniform draws plus both ends. Throws
/// PretrainError with the achieved sup deviation if tolerance is missed.
WarpModel pretrain_identity(WarpModel model, const PretrainConfig& cfg = {});
/// Seeded fresh model, pretrained; cached per (seed, cfg).
WarpModel pretrained_identity(std::uint64_t seed);

enum class WarpAction {
  kFull,     // (q2 o z) sqrt(z')
  kPrinted,  // q2 o z
};

struct TemporalRegConfig {
  double lambda = 10.0;
  int epochs = 3000;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  int penalty_samples = 101;
  int resample_every = 200;
  WarpAction action = WarpAction::kFull;
  std::uint64_t seed = 0;
};

struct WarpLoss {
  double total = 0.0;
  double data = 0.0;
  double reg = 0.0;
};

/// Data term on q1's grid: trapezoid of |q1(t) - (q2 o z)(t) [sqrt z'(t)]|^2
/// with q2 interpolated linearly; reg = trapezoid of max(0, -z') on a
/// uniform penalty grid. q2 must be sampled uniformly on [0, 1].
WarpLoss warp_loss(const SrvfCurve& q1, const SrvfCurve& q2, const TimeWarp& warp, double lambda,
                   WarpAction action = WarpAction::kFull, int penalty_samples = 101);

/// q2 o z, with the sqrt(z') factor for the full action.
SrvfCurve apply_warp(const SrvfCurve& q2, const TimeWarp& warp, WarpAction action = WarpAction::kFull);

struct TemporalRegResult {
  TimeWarp warp;
  std::vector<double> loss_trace;  // total per epoch, before the step
  WarpLoss final_loss;
  WarpLoss identity_loss;
  bool converged = false;          // final reg < 1e-4
};

/// Optimizes a copy of `initial` (a pretrained warp) on the loss above by
/// RMSProp; the penalty samples are re-drawn every resample_every epochs.
/// Returns the best iterate seen.
TemporalRegResult register_temporal(const SrvfCurve& q1, const SrvfCurve& q2, const TemporalRegConfig& cfg,
                                    const WarpModel& initial);
TemporalRegResult register_temporal(const SrvfCurve& q1, const SrvfCurve& q2, const TemporalRegConfig& cfg = {});

/// sup over 101 samples of |recovered(t) - applied^{-1}(t)|.
double recover_inverse_error(const TimeWarp& applied, const TimeWarp& recovered);

/// Uniform grid 0, 1/(n-1), ..., 1.
Eigen::VectorXd warp_grid(int n = 101);

}  // namespace e4d
