#include "elastica4d/dsnsfit.hpp"

#include "elastica4d/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace e4d {

namespace {

struct PairBatch {
  Eigen::MatrixXd u, v, t, target;
};

PairBatch gather(const SampledSequence4D& seq, std::span<const Eigen::Index> pairs) {
  const Eigen::Index n = seq.grid.size();
  const auto b = static_cast<Eigen::Index>(pairs.size());
  PairBatch batch{Eigen::MatrixXd(b, 1), Eigen::MatrixXd(b, 1), Eigen::MatrixXd(b, 1), Eigen::MatrixXd(b, 3)};
  const int cols = seq.grid.cols();
  for (Eigen::Index r = 0; r < b; ++r) {
    const Eigen::Index frame = pairs[static_cast<std::size_t>(r)] / n;
    const Eigen::Index sample = pairs[static_cast<std::size_t>(r)] % n;
    batch.u(r, 0) = seq.grid.u(static_cast<int>(sample / cols));
    batch.v(r, 0) = seq.grid.v(static_cast<int>(sample % cols));
    batch.t(r, 0) = seq.times[static_cast<std::size_t>(frame)];
    batch.target.row(r) = seq.frames[static_cast<std::size_t>(frame)].row(sample);
  }
  return batch;
}

void check_config(const SampledSequence4D& seq, const FitConfig& config) {
  const Eigen::Index total = seq.grid.size() * seq.frame_count();
  if (config.epochs < 0) throw std::invalid_argument("fit: negative epoch count");
  if (config.batch_size < 1 || config.batch_size > total) {
    throw std::invalid_argument("fit: batch size must lie in [1, K*N] = [1, " + std::to_string(total) + "]");
  }
  if (config.resample_every < 1) throw std::invalid_argument("fit: resample_every must be positive");
}

double scheduled_rate(const FitConfig& config, int epoch) {
  if (config.final_learning_rate <= 0.0 || config.epochs <= 1) return config.learning_rate;
  const double progress = static_cast<double>(epoch) / (config.epochs - 1);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return config.final_learning_rate + (config.learning_rate - config.final_learning_rate) * cosine;
}

}  // namespace

BatchLoss fit_batch_loss(const DsnsModel& model, const SampledSequence4D& seq, std::span<const Eigen::Index> pairs) {
  if (pairs.empty()) throw std::invalid_argument("fit: empty batch");
  const PairBatch batch = gather(seq, pairs);
  ad::Tape tape;
  const auto params = model.mlp().bind(tape, true);
  const ad::Jet out = model.forward(params, tape.leaf(batch.u), tape.leaf(batch.v), tape.leaf(batch.t));
  const ad::Var residual = out.value - tape.leaf(batch.target);
  const ad::Var loss = ad::sum(ad::square(residual)) / static_cast<double>(pairs.size());
  tape.backward(loss);
  BatchLoss result{loss.scalar(), {}};
  result.gradients.reserve(params.size());
  for (const ad::Var& p : params) result.gradients.push_back(p.grad());
  return result;
}

double fit_loss(const DsnsModel& model, const SampledSequence4D& seq) {
  double total = 0.0;
  Eigen::Index count = 0;
  const Eigen::MatrixX2d angles = seq.grid.angles();
  Eigen::MatrixX3d inputs(angles.rows(), 3);
  inputs.leftCols<2>() = angles;
  for (int k = 0; k < seq.frame_count(); ++k) {
    inputs.col(2).setConstant(seq.times[static_cast<std::size_t>(k)]);
    total += (model.evaluate(inputs) - seq.frames[static_cast<std::size_t>(k)]).squaredNorm();
    count += angles.rows();
  }
  return total / static_cast<double>(count);
}

FitConfig FitConfig::desk() {
  FitConfig cfg;
  cfg.epochs = 10000;
  cfg.batch_size = 1024;
  cfg.learning_rate = 2e-3;
  cfg.final_learning_rate = 1e-6;
  cfg.architecture = DsnsArchitecture::desk();
  return cfg;
}

FitConfig FitConfig::paper() {
  FitConfig cfg;
  cfg.epochs = 50000;
  cfg.batch_size = 80000;
  cfg.learning_rate = 1e-4;
  cfg.architecture = DsnsArchitecture::paper();
  return cfg;
}

FitResult fit_dsns(const SampledSequence4D& seq, const FitConfig& config) {
  return fit_dsns(seq, config, DsnsModel(config.architecture, config.seed));
}

FitResult fit_dsns(const SampledSequence4D& seq, const FitConfig& config, DsnsModel model) {
  seq.validate();
  check_config(seq, config);
  FitResult result{std::move(model), {}};
  result.loss_history.reserve(static_cast<std::size_t>(config.epochs));

  const Eigen::Index total = seq.grid.size() * seq.frame_count();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // Separate stream from the weight initialization, which also uses config.seed.
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::size_t cursor = order.size();
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  RmsProp optimizer({config.learning_rate, config.momentum, 1e-8});
  std::span<const Eigen::Index> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch % config.resample_every == 0) {
      if (cursor + batch_size > order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch = std::span<const Eigen::Index>(order).subspan(cursor, batch_size);
      cursor += batch_size;
    }
    const double lr = scheduled_rate(config, epoch);
    BatchLoss step = fit_batch_loss(result.model, seq, batch);
    if (!std::isfinite(step.loss)) {
      std::ostringstream os;
      os << "fit: loss became " << step.loss << " at epoch " << epoch << " (learning rate " << lr << ")";
      throw FitError(os.str(), epoch, lr);
    }
    result.loss_history.push_back(step.loss);
    optimizer.set_learning_rate(lr);
    const std::vector<Eigen::MatrixXd*> params = result.model.mlp().parameters();
    optimizer.step(params, step.gradients);
    if (config.report && config.report_every > 0 && (epoch + 1) % config.report_every == 0) {
      config.report(epoch + 1, step.loss);
    }
  }
  return result;
}

SampledSequence4D evaluate_sequence(const DsnsModel& model, const SphereGrid& grid, const std::vector<double>& times) {
  SampledSequence4D seq = sample_sequence(DsnsSurface(model), grid, times, "dsns");
  return seq;
}

Jacobian surface_jacobian(const DsnsModel& model, double u, double v, double t) {
  check_domain(u, v, t);
  Eigen::MatrixX2d at(1, 2);
  at << u, v;
  const SurfacePartials p = surface_jacobian(model, at, t);
  return {p.du.row(0).transpose(), p.dv.row(0).transpose(), p.dt.row(0).transpose()};
}

SurfacePartials surface_jacobian(const DsnsModel& model, const Eigen::MatrixX2d& angles, double t) {
  return surface_partials(DsnsSurface(model), angles, t);
}

Eigen::Vector3d normal_field(const DsnsModel& model, double u, double v, double t) {
  const Jacobian j = surface_jacobian(model, u, v, t);
  return j.du.cross(j.dv);
}

Eigen::MatrixX3d normal_field(const DsnsModel& model, const Eigen::MatrixX2d& angles, double t) {
  return surface_normals(DsnsSurface(model), angles, t);
}

}  // namespace e4d
