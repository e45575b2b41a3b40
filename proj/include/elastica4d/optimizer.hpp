#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace e4d {

/// RMSProp with a squared-gradient moving average:
///   acc <- m * acc + (1 - m) * g^2
///   p   <- p - lr * g / (sqrt(acc) + eps)
class RmsProp {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double momentum = 0.9;  // averaging factor of the accumulator
    double epsilon = 1e-8;
  };

  RmsProp() : RmsProp(Options{}) {}
  explicit RmsProp(Options options);

  /// Applies one update. Accumulators are created on the first call and
  /// must keep matching the parameter shapes afterwards.
  void step(std::span<Eigen::MatrixXd* const> params, std::span<const Eigen::MatrixXd> grads);

  const Options& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const std::vector<Eigen::MatrixXd>& accumulators() const { return acc_; }
  void reset() { acc_.clear(); }

 private:
  Options options_;
  std::vector<Eigen::MatrixXd> acc_;
};

}  // namespace e4d
