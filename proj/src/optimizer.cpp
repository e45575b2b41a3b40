#include "elastica4d/optimizer.hpp"

#include "elastica4d/tensor.hpp"

#include <stdexcept>
#include <string>

namespace e4d {

RmsProp::RmsProp(Options options) : options_(options) {
  if (!(options_.learning_rate > 0.0)) throw std::invalid_argument("rmsprop: learning rate must be positive");
  if (options_.momentum < 0.0 || options_.momentum >= 1.0) {
    throw std::invalid_argument("rmsprop: momentum must lie in [0, 1)");
  }
}

void RmsProp::step(std::span<Eigen::MatrixXd* const> params, std::span<const Eigen::MatrixXd> grads) {
  if (params.size() != grads.size()) {
    throw ad::ShapeError("rmsprop: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (acc_.empty()) {
    acc_.reserve(params.size());
    for (const Eigen::MatrixXd* p : params) acc_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
  if (acc_.size() != params.size()) throw ad::ShapeError("rmsprop: parameter count changed");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Eigen::MatrixXd& p = *params[k];
    const Eigen::MatrixXd& g = grads[k];
    Eigen::MatrixXd& acc = acc_[k];
    if (p.rows() != g.rows() || p.cols() != g.cols() || p.rows() != acc.rows() || p.cols() != acc.cols()) {
      throw ad::ShapeError("rmsprop: shape mismatch for parameter " + std::to_string(k));
    }
    const double m = options_.momentum;
    acc.array() = m * acc.array() + (1.0 - m) * g.array().square();
    p.array() -= options_.learning_rate * g.array() / (acc.array().sqrt() + options_.epsilon);
  }
}

}  // namespace e4d
