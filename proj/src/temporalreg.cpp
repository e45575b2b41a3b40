#include "elastica4d/temporalreg.hpp"

#include "elastica4d/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

namespace e4d {

namespace {

constexpr double kSqrtFloor = 1e-12;

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& t) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(t.size());
  for (Eigen::Index i = 1; i < t.size(); ++i) {
    const double h = 0.5 * (t(i) - t(i - 1));
    w(i - 1) += h;
    w(i) += h;
  }
  return w;
}

void check_uniform(const Eigen::VectorXd& t) {
  const Eigen::Index m = t.size();
  if (m < 2 || t(0) != 0.0 || t(m - 1) != 1.0) throw CurveError("temporal registration: q2 must span [0, 1]");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(t(i) - static_cast<double>(i) / static_cast<double>(m - 1)) > 1e-12) {
      throw CurveError("temporal registration: q2 must be sampled uniformly");
    }
  }
}

void check_pair(const SrvfCurve& q1, const SrvfCurve& q2) {
  check_uniform(q2.times);
  if (q1.values.cols() != q2.values.cols()) throw CurveError("temporal registration: curve dimensions differ");
  if (q1.basis && q2.basis && q1.basis != q2.basis) {
    throw CurveError("temporal registration: curves live in different bases");
  }
}

// Rows [begin, begin + count) of a column, as a product with a selector.
ad::Var rows(ad::Tape& tape, ad::Var a, Eigen::Index begin, Eigen::Index count) {
  Eigen::MatrixXd select = Eigen::MatrixXd::Zero(count, a.value().rows());
  select.middleCols(begin, count).setIdentity();
  return ad::matmul(tape.leaf(std::move(select)), a);
}

struct TapeLoss {
  ad::Var total;
  ad::Var data;
  ad::Var reg;
};

// Loss of the anchored warp network on a tape; penalty taken on `penalty`.
TapeLoss tape_loss(ad::Tape& tape, std::span<const ad::Var> params, const WarpModel& model, const SrvfCurve& q1,
                   const std::shared_ptr<const Eigen::MatrixXd>& q2_table, const Eigen::VectorXd& penalty,
                   double lambda, WarpAction action) {
  const Eigen::Index m = q1.times.size();
  const Eigen::Index p = penalty.size();
  Eigen::MatrixXd x(m + p + 2, 1);
  x.col(0) << q1.times, penalty, 0.0, 1.0;
  const ad::Jet z = model.forward(params, ad::seed(tape.leaf(x), 0, 1));
  const ad::Var z0 = rows(tape, z.value, m + p, 1);
  const ad::Var denom = rows(tape, z.value, m + p + 1, 1) - z0;
  const ad::Var zq = (rows(tape, z.value, 0, m) - z0) / denom;
  ad::Var q2z = ad::interp(zq, q2_table);
  if (action == WarpAction::kFull) {
    const ad::Var dzq = rows(tape, z.tangents[0], 0, m) / denom;
    q2z = q2z * ad::sqrt(ad::relu(dzq) + kSqrtFloor);
  }
  const ad::Var data =
      ad::sum(tape.leaf(trapezoid_weights(q1.times)) * ad::row_sum(ad::square(tape.leaf(q1.values) - q2z)));
  const ad::Var slope = rows(tape, z.tangents[0], m, p) / denom;
  const ad::Var reg = ad::sum(tape.leaf(trapezoid_weights(penalty)) * ad::relu(-slope));
  return {data + lambda * reg, data, reg};
}

Eigen::VectorXd random_penalty_grid(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd t(std::max(n, 2));
  t(0) = 0.0;
  t(t.size() - 1) = 1.0;
  for (Eigen::Index i = 1; i + 1 < t.size(); ++i) t(i) = u(rng);
  std::sort(t.data(), t.data() + t.size());
  return t;
}

}  // namespace

Eigen::VectorXd warp_grid(int n) { return Eigen::VectorXd::LinSpaced(n, 0.0, 1.0); }

TimeWarp::TimeWarp() : times_(Eigen::Vector2d(0.0, 1.0)), values_(Eigen::Vector2d(0.0, 1.0)) {}

TimeWarp TimeWarp::neural(WarpModel model) {
  TimeWarp w;
  w.model_ = std::move(model);
  w.times_.resize(0);
  w.values_.resize(0);
  return w;
}

TimeWarp TimeWarp::tabulated(Eigen::VectorXd times, Eigen::VectorXd values) {
  if (times.size() < 2 || times.size() != values.size()) {
    throw std::invalid_argument("time warp: need matching sample vectors of length at least two");
  }
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    if (!(times(i) > times(i - 1))) throw std::invalid_argument("time warp: sample times must increase");
  }
  TimeWarp w;
  w.times_ = std::move(times);
  w.values_ = std::move(values);
  return w;
}

TimeWarp TimeWarp::tabulate(const ClosedFormWarp& warp, int samples) {
  const Eigen::VectorXd t = warp_grid(samples);
  return tabulated(t, t.unaryExpr([&](double x) { return warp(x); }));
}

const WarpModel& TimeWarp::model() const {
  if (!model_) throw std::logic_error("time warp: not a neural warp");
  return *model_;
}

double TimeWarp::operator()(double t) const { return evaluate(Eigen::VectorXd::Constant(1, t))(0); }

Eigen::VectorXd TimeWarp::evaluate(const Eigen::VectorXd& t) const {
  if (model_) {
    const double z0 = model_->evaluate(0.0);
    const double z1 = model_->evaluate(1.0);
    return (model_->evaluate(t).array() - z0) / (z1 - z0);
  }
  return interpolate_rows(times_, values_, t).col(0);
}

Eigen::VectorXd TimeWarp::derivative(const Eigen::VectorXd& t) const {
  if (model_) {
    const double z0 = model_->evaluate(0.0);
    const double z1 = model_->evaluate(1.0);
    return model_->evaluate_with_derivative(t).second / (z1 - z0);
  }
  Eigen::VectorXd d(t.size());
  const Eigen::Index n = times_.size();
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    Eigen::Index hi = std::upper_bound(times_.data(), times_.data() + n, t(i)) - times_.data();
    hi = std::clamp<Eigen::Index>(hi, 1, n - 1);
    d(i) = (values_(hi) - values_(hi - 1)) / (times_(hi) - times_(hi - 1));
  }
  return d;
}

TimeWarp TimeWarp::inverse() const {
  const TimeWarp table = model_ ? tabulated(warp_grid(1001), evaluate(warp_grid(1001))) : *this;
  for (Eigen::Index i = 1; i < table.values_.size(); ++i) {
    if (!(table.values_(i) > table.values_(i - 1))) {
      throw std::invalid_argument("time warp: inverse needs a strictly increasing warp");
    }
  }
  return tabulated(table.values_, table.times_);
}

WarpModel pretrain_identity(WarpModel model, const PretrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RmsProp opt({cfg.learning_rate, 0.9, 1e-8});
  const Eigen::VectorXd grid = warp_grid(101);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double progress = static_cast<double>(epoch) / std::max(1, cfg.epochs);
    opt.set_learning_rate(cfg.final_learning_rate + 0.5 * (cfg.learning_rate - cfg.final_learning_rate) *
                                                        (1.0 + std::cos(std::numbers::pi * progress)));
    Eigen::MatrixXd t(cfg.batch + 2, 1);
    for (int i = 0; i < cfg.batch; ++i) t(i, 0) = u(rng);
    t(cfg.batch, 0) = 0.0;
    t(cfg.batch + 1, 0) = 1.0;
    ad::Tape tape;
    const auto params = model.mlp().bind(tape, true);
    const ad::Var target = tape.leaf(t);
    // Cross-entropy against t on the logits; unlike squared error its
    // gradient does not vanish where the sigmoid saturates near 0 and 1.
    const ad::Var logits = model.mlp().forward(params, target).value;
    const ad::Var loss = ad::mean(ad::softplus(logits) - target * logits);
    tape.backward(loss);
    std::vector<Eigen::MatrixXd> grads;
    for (const ad::Var& p : params) grads.push_back(p.grad());
    opt.step(model.mlp().parameters(), grads);
  }
  const double sup = (model.evaluate(grid) - grid).cwiseAbs().maxCoeff();
  if (!(sup < cfg.tolerance)) {
    std::ostringstream os;
    os << "pretrain_identity: sup |z(t) - t| = " << sup << " after " << cfg.epochs << " epochs";
    throw PretrainError(os.str(), sup);
  }
  return model;
}

WarpModel pretrained_identity(std::uint64_t seed) {
  static std::mutex mutex;
  static std::map<std::uint64_t, WarpModel> cache;
  const std::lock_guard lock(mutex);
  auto it = cache.find(seed);
  if (it == cache.end()) {
    PretrainConfig cfg;
    cfg.seed = seed;
    it = cache.emplace(seed, pretrain_identity(WarpModel(seed), cfg)).first;
  }
  return it->second;
}

SrvfCurve apply_warp(const SrvfCurve& q2, const TimeWarp& warp, WarpAction action) {
  SrvfCurve out = q2;
  out.values = interpolate_rows(q2.times, q2.values, warp.evaluate(q2.times));
  if (action == WarpAction::kFull) {
    const Eigen::VectorXd d = warp.derivative(q2.times);
    for (Eigen::Index i = 0; i < d.size(); ++i) out.values.row(i) *= std::sqrt(std::max(d(i), 0.0) + kSqrtFloor);
  }
  return out;
}

WarpLoss warp_loss(const SrvfCurve& q1, const SrvfCurve& q2, const TimeWarp& warp, double lambda, WarpAction action,
                   int penalty_samples) {
  check_pair(q1, q2);
  WarpLoss loss;
  Eigen::MatrixXd warped = interpolate_rows(q2.times, q2.values, warp.evaluate(q1.times));
  if (action == WarpAction::kFull) {
    const Eigen::VectorXd d = warp.derivative(q1.times);
    for (Eigen::Index i = 0; i < d.size(); ++i) warped.row(i) *= std::sqrt(std::max(d(i), 0.0) + kSqrtFloor);
  }
  loss.data = curve_l2(q1.times, q1.values, warped);
  const Eigen::VectorXd grid = warp_grid(penalty_samples);
  loss.reg = trapezoid_weights(grid).dot((-warp.derivative(grid)).cwiseMax(0.0));
  loss.total = loss.data + lambda * loss.reg;
  return loss;
}

TemporalRegResult register_temporal(const SrvfCurve& q1, const SrvfCurve& q2, const TemporalRegConfig& cfg,
                                    const WarpModel& initial) {
  check_pair(q1, q2);
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("register_temporal: lambda must be non-negative");
  if (cfg.resample_every < 1 || cfg.penalty_samples < 2) {
    throw std::invalid_argument("register_temporal: invalid sampling schedule");
  }
  const auto table = std::make_shared<const Eigen::MatrixXd>(q2.values);
  TemporalRegResult result;
  result.identity_loss = warp_loss(q1, q2, TimeWarp::neural(initial), cfg.lambda, cfg.action, cfg.penalty_samples);

  WarpModel model = initial;
  WarpModel best = initial;
  double best_loss = std::numeric_limits<double>::infinity();
  RmsProp opt({cfg.learning_rate, cfg.momentum, 1e-8});
  std::mt19937_64 rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
  Eigen::VectorXd penalty;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch % cfg.resample_every == 0) penalty = random_penalty_grid(cfg.penalty_samples, rng);
    ad::Tape tape;
    const auto params = model.mlp().bind(tape, true);
    const TapeLoss loss = tape_loss(tape, params, model, q1, table, penalty, cfg.lambda, cfg.action);
    const double value = loss.total.scalar();
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "register_temporal: loss became non-finite at epoch " << epoch;
      throw TemporalRegError(os.str(), result.loss_trace);
    }
    result.loss_trace.push_back(value);
    if (value < best_loss) {
      best_loss = value;
      best = model;
    }
    tape.backward(loss.total);
    std::vector<Eigen::MatrixXd> grads;
    for (const ad::Var& p : params) grads.push_back(p.grad());
    opt.step(model.mlp().parameters(), grads);
  }
  result.warp = TimeWarp::neural(best);
  result.final_loss = warp_loss(q1, q2, result.warp, cfg.lambda, cfg.action, cfg.penalty_samples);
  result.converged = result.final_loss.reg < 1e-4;
  return result;
}

TemporalRegResult register_temporal(const SrvfCurve& q1, const SrvfCurve& q2, const TemporalRegConfig& cfg) {
  return register_temporal(q1, q2, cfg, pretrained_identity(cfg.seed));
}

double recover_inverse_error(const TimeWarp& applied, const TimeWarp& recovered) {
  const TimeWarp table = applied.is_neural() ? TimeWarp::tabulated(warp_grid(1001), applied.evaluate(warp_grid(1001)))
                                             : applied;
  const Eigen::Index n = table.values().size();
  if (table.values()(0) != 0.0 || table.values()(n - 1) != 1.0) {
    throw std::invalid_argument("recover_inverse_error: applied warp must fix 0 and 1");
  }
  const Eigen::VectorXd grid = warp_grid(101);
  return (recovered.evaluate(grid) - table.inverse().evaluate(grid)).cwiseAbs().maxCoeff();
}

}  // namespace e4d
