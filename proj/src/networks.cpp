#include "elastica4d/networks.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace e4d {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Eigen::Index kEvalChunk = 8192;

DenseLayer make_layer(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseLayer layer;
  layer.weight.resize(fan_in, fan_out);
  for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = dist(rng);
  layer.bias.resize(1, fan_out);
  for (Eigen::Index c = 0; c < fan_out; ++c) layer.bias(0, c) = dist(rng);
  return layer;
}

ad::Jet affine(const ad::Jet& x, ad::Var weight, ad::Var bias) {
  ad::Jet y = ad::matmul(x, weight);
  y.value = y.value + bias;
  return y;
}

// Frequencies 2^k * scale for k = 0..count-1 as a 1 x count row.
ad::Array frequency_row(int count, double scale) {
  ad::Array row(1, count);
  for (int k = 0; k < count; ++k) row(0, k) = std::ldexp(scale, k);
  return row;
}

void encode_coordinate(const ad::Jet& x, int frequencies, double scale, bool raw,
                       std::vector<ad::Jet>& parts) {
  if (raw) parts.push_back(x);
  if (frequencies <= 0) return;
  const ad::Var freq = x.tape().leaf(frequency_row(frequencies, scale));
  const ad::Jet arg = ad::matmul(x, freq);
  parts.push_back(ad::sin(arg));
  parts.push_back(ad::cos(arg));
}

}  // namespace

int EncodingConfig::dimension() const {
  const int raw = include_raw_input ? 1 : 0;
  return 2 * (raw + 2 * spatial_frequencies) + (raw + 2 * temporal_frequencies);
}

void check_domain(double u, double v, double t) {
  if (!(u >= 0.0 && u <= kPi) || !(v >= 0.0 && v < 2.0 * kPi) || !(t >= 0.0 && t <= 1.0)) {
    std::ostringstream os;
    os << "input (u=" << u << ", v=" << v << ", t=" << t
       << ") outside [0,pi] x [0,2pi) x [0,1]";
    throw DomainError(os.str());
  }
}

Eigen::RowVectorXd encode(const EncodingConfig& config, double u, double v, double t) {
  check_domain(u, v, t);
  Eigen::RowVectorXd out(config.dimension());
  Eigen::Index at = 0;
  auto put = [&](double x, double scale, int count) {
    if (config.include_raw_input) out(at++) = x;
    for (int k = 0; k < count; ++k) out(at++) = std::sin(std::ldexp(scale, k) * x);
    for (int k = 0; k < count; ++k) out(at++) = std::cos(std::ldexp(scale, k) * x);
  };
  put(u, 1.0, config.spatial_frequencies);
  put(v, 1.0, config.spatial_frequencies);
  put(t, kPi, config.temporal_frequencies);
  return out;
}

ad::Jet encode(const EncodingConfig& config, const ad::Jet& u, const ad::Jet& v, const ad::Jet& t) {
  std::vector<ad::Jet> parts;
  encode_coordinate(u, config.spatial_frequencies, 1.0, config.include_raw_input, parts);
  encode_coordinate(v, config.spatial_frequencies, 1.0, config.include_raw_input, parts);
  encode_coordinate(t, config.temporal_frequencies, kPi, config.include_raw_input, parts);
  return ad::concat(parts);
}

ResidualMlp::ResidualMlp(Shape shape, std::uint64_t seed) : shape_(shape) {
  if (shape.input < 1 || shape.width < 1 || shape.blocks < 0 || shape.output < 1) {
    throw std::invalid_argument("residual mlp: invalid shape");
  }
  std::mt19937_64 rng(seed);
  input_ = make_layer(shape.input, shape.width, rng);
  blocks_.resize(shape.blocks);
  for (auto& block : blocks_) {
    block[0] = make_layer(shape.width, shape.width, rng);
    block[1] = make_layer(shape.width, shape.width, rng);
  }
  head_ = make_layer(shape.width, shape.output, rng);
}

std::vector<Eigen::MatrixXd*> ResidualMlp::parameters() {
  std::vector<Eigen::MatrixXd*> out{&input_.weight, &input_.bias};
  for (auto& block : blocks_) {
    for (auto& layer : block) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<const Eigen::MatrixXd*> ResidualMlp::parameters() const {
  std::vector<const Eigen::MatrixXd*> out;
  for (Eigen::MatrixXd* p : const_cast<ResidualMlp*>(this)->parameters()) out.push_back(p);
  return out;
}

std::size_t ResidualMlp::parameter_count() const {
  std::size_t n = 0;
  for (const Eigen::MatrixXd* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

std::vector<ad::Var> ResidualMlp::bind(ad::Tape& tape, bool trainable) const {
  std::vector<ad::Var> vars;
  for (const Eigen::MatrixXd* p : parameters()) vars.push_back(tape.leaf(*p, trainable));
  return vars;
}

ad::Jet ResidualMlp::forward(std::span<const ad::Var> params, const ad::Jet& x) const {
  const std::size_t expected = 4 + 4 * blocks_.size();
  if (params.size() != expected) throw std::invalid_argument("residual mlp: wrong parameter binding");
  std::size_t k = 0;
  auto next = [&]() { return params[k++]; };
  const ad::Var w0 = next();
  const ad::Var b0 = next();
  ad::Jet h = affine(x, w0, b0);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const ad::Var w1 = next();
    const ad::Var b1 = next();
    const ad::Var w2 = next();
    const ad::Var b2 = next();
    const ad::Jet inner = ad::softplus(affine(ad::softplus(h), w1, b1));
    h = h + affine(inner, w2, b2);
  }
  const ad::Var wh = next();
  const ad::Var bh = next();
  return affine(ad::softplus(h), wh, bh);
}

DsnsModel::DsnsModel(const DsnsArchitecture& arch, std::uint64_t seed)
    : arch_(arch), mlp_({arch.encoding.dimension(), arch.width, arch.blocks, 3}, seed) {}

DsnsModel::DsnsModel(const DsnsArchitecture& arch, ResidualMlp mlp) : arch_(arch), mlp_(std::move(mlp)) {
  const ResidualMlp::Shape expected{arch.encoding.dimension(), arch.width, arch.blocks, 3};
  if (!(mlp_.shape() == expected)) throw std::invalid_argument("dsns: network shape does not match architecture");
}

ad::Jet DsnsModel::forward(std::span<const ad::Var> params, const ad::Jet& u, const ad::Jet& v,
                           const ad::Jet& t) const {
  return mlp_.forward(params, encode(arch_.encoding, u, v, t));
}

Eigen::Vector3d DsnsModel::evaluate(double u, double v, double t) const {
  Eigen::MatrixX3d in(1, 3);
  in << u, v, t;
  return evaluate(in).row(0).transpose();
}

Eigen::MatrixX3d DsnsModel::evaluate(const Eigen::MatrixX3d& inputs) const {
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) check_domain(inputs(r, 0), inputs(r, 1), inputs(r, 2));
  Eigen::MatrixX3d out(inputs.rows(), 3);
  for (Eigen::Index start = 0; start < inputs.rows(); start += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, inputs.rows() - start);
    ad::Tape tape;
    const auto params = mlp_.bind(tape, false);
    const ad::Var u = tape.leaf(inputs.block(start, 0, n, 1));
    const ad::Var v = tape.leaf(inputs.block(start, 1, n, 1));
    const ad::Var t = tape.leaf(inputs.block(start, 2, n, 1));
    out.middleRows(start, n) = forward(params, u, v, t).value.value();
  }
  return out;
}

WarpModel::WarpModel(std::uint64_t seed) : mlp_({1, kWidth, kBlocks, 1}, seed) {}

WarpModel::WarpModel(ResidualMlp mlp) : mlp_(std::move(mlp)) {
  const ResidualMlp::Shape expected{1, kWidth, kBlocks, 1};
  if (!(mlp_.shape() == expected)) throw std::invalid_argument("warp: network shape does not match architecture");
}

ad::Jet WarpModel::forward(std::span<const ad::Var> params, const ad::Jet& t) const {
  return ad::sigmoid(mlp_.forward(params, t));
}

double WarpModel::evaluate(double t) const {
  Eigen::VectorXd in(1);
  in(0) = t;
  return evaluate(in)(0);
}

Eigen::VectorXd WarpModel::evaluate(const Eigen::VectorXd& t) const {
  ad::Tape tape;
  const auto params = mlp_.bind(tape, false);
  return forward(params, tape.leaf(t)).value.value().col(0);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> WarpModel::evaluate_with_derivative(const Eigen::VectorXd& t) const {
  ad::Tape tape;
  const auto params = mlp_.bind(tape, false);
  const ad::Jet out = forward(params, ad::seed(tape.leaf(t), 0, 1));
  return {out.value.value().col(0), out.tangents[0].value().col(0)};
}

}  // namespace e4d
