#include "elastica4d/checkpoint.hpp"
#include "elastica4d/networks.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace e4d;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("elastica4d_test_" + name);
}

DsnsModel small_model(std::uint64_t seed) { return DsnsModel({2, 16, {3, 2, true}}, seed); }

}  // namespace

TEST_CASE("encoding dimension") {
  CHECK(EncodingConfig{}.dimension() == 35);
  CHECK(EncodingConfig{6, 4, true}.dimension() == 2 * (1 + 12) + (1 + 8));
  CHECK(EncodingConfig{0, 0, true}.dimension() == 3);
  CHECK(EncodingConfig{2, 1, false}.dimension() == 2 * 4 + 2);
}

TEST_CASE("encoding values") {
  SUBCASE("no frequencies is the identity") {
    const Eigen::RowVectorXd e = encode({0, 0, true}, 0.3, 1.2, 0.8);
    CHECK(e == Eigen::RowVector3d(0.3, 1.2, 0.8));
  }
  SUBCASE("zero input") {
    const EncodingConfig cfg{6, 4, true};
    const Eigen::RowVectorXd e = encode(cfg, 0.0, 0.0, 0.0);
    Eigen::Index at = 0;
    for (int L : {6, 6, 4}) {
      CHECK(e(at++) == 0.0);
      for (int k = 0; k < L; ++k) CHECK(e(at++) == 0.0);
      for (int k = 0; k < L; ++k) CHECK(e(at++) == 1.0);
    }
  }
  SUBCASE("layout: raw, sines, cosines per coordinate") {
    const EncodingConfig cfg{2, 1, true};
    const double u = 0.4, v = 2.5, t = 0.3;
    const Eigen::RowVectorXd e = encode(cfg, u, v, t);
    const Eigen::RowVectorXd expected =
        (Eigen::RowVectorXd(13) << u, std::sin(u), std::sin(2 * u), std::cos(u), std::cos(2 * u), v, std::sin(v),
         std::sin(2 * v), std::cos(v), std::cos(2 * v), t, std::sin(std::numbers::pi * t),
         std::cos(std::numbers::pi * t))
            .finished();
    CHECK((e - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("batched encoding agrees with the scalar form") {
    const EncodingConfig cfg;
    ad::Tape tape;
    const Eigen::RowVectorXd single = encode(cfg, 1.1, 4.0, 0.25);
    const ad::Jet batch = encode(cfg, tape.leaf(Eigen::MatrixXd::Constant(1, 1, 1.1)),
                                 tape.leaf(Eigen::MatrixXd::Constant(1, 1, 4.0)),
                                 tape.leaf(Eigen::MatrixXd::Constant(1, 1, 0.25)));
    CHECK((batch.value.value().row(0) - single).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("domain") {
    CHECK_THROWS_AS(encode({}, -0.1, 0.0, 0.0), DomainError);
    CHECK_THROWS_AS(encode({}, 0.0, 2 * std::numbers::pi, 0.0), DomainError);
    CHECK_THROWS_AS(encode({}, 0.0, 0.0, 1.5), DomainError);
    CHECK_NOTHROW(encode({}, std::numbers::pi, 0.0, 1.0));
  }
}

TEST_CASE("residual blocks with zero weights are the identity") {
  ResidualMlp mlp({3, 8, 3, 2}, 4);
  const auto params = mlp.parameters();
  for (auto& block : mlp.blocks()) {
    for (auto& layer : block) {
      layer.weight.setZero();
      layer.bias.setZero();
    }
  }
  ResidualMlp shallow({3, 8, 0, 2}, 4);
  *shallow.parameters()[0] = *params[0];
  *shallow.parameters()[1] = *params[1];
  *shallow.parameters()[2] = *params.end()[-2];
  *shallow.parameters()[3] = *params.end()[-1];
  ad::Tape tape;
  const ad::Var x = tape.leaf((Eigen::MatrixXd(2, 3) << 0.1, -0.4, 2.0, 1.0, 0.3, -0.2).finished());
  const auto deep_out = mlp.forward(mlp.bind(tape, false), x).value.value();
  const auto shallow_out = shallow.forward(shallow.bind(tape, false), x).value.value();
  CHECK((deep_out - shallow_out).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zeroed head outputs its bias") {
  DsnsModel model = small_model(1);
  model.mlp().head().weight.setZero();
  model.mlp().head().bias << 0.1, -0.2, 0.3;
  CHECK(model.evaluate(1.0, 2.0, 0.5) == Eigen::Vector3d(0.1, -0.2, 0.3));
}

TEST_CASE("initialization and forward are deterministic") {
  const DsnsModel a = small_model(9);
  const DsnsModel b = small_model(9);
  const DsnsModel c = small_model(10);
  CHECK(a.evaluate(0.5, 1.0, 0.2) == b.evaluate(0.5, 1.0, 0.2));
  CHECK(a.evaluate(0.5, 1.0, 0.2) != c.evaluate(0.5, 1.0, 0.2));
  for (const Eigen::MatrixXd* p : a.mlp().parameters()) {
    const double bound = std::sqrt(1.0 / static_cast<double>(p->rows() == 1 ? 1 : p->rows()));
    if (p->rows() > 1) CHECK(p->cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("parameter counts") {
  const DsnsModel paper(DsnsArchitecture::paper(), 0);
  const std::size_t w = 1024;
  CHECK(paper.mlp().parameter_count() == 35 * w + w + 12 * (w * w + w) + 3 * w + 3);
  CHECK(WarpModel(0).mlp().parameter_count() == 32 + 32 + 4 * (32 * 32 + 32) + 32 + 1);
}

TEST_CASE("warp output stays in (0, 1) and its derivative is exact") {
  const WarpModel warp(3);
  for (double t : {-10.0, 0.0, 0.5, 1.0, 10.0}) {
    const double z = warp.evaluate(t);
    CHECK(z > 0.0);
    CHECK(z < 1.0);
  }
  Eigen::VectorXd t(5);
  t << 0.0, 0.2, 0.5, 0.77, 1.0;
  const auto [z, dz] = warp.evaluate_with_derivative(t);
  const double h = 1e-5;
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    const double fd = (warp.evaluate(t(k) + h) - warp.evaluate(t(k) - h)) / (2 * h);
    CHECK(std::abs(dz(k) - fd) / std::abs(fd) < 1e-4);
    CHECK(z(k) == doctest::Approx(warp.evaluate(t(k))).epsilon(1e-14));
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const DsnsModel model = small_model(21);
  const auto path = temp_path("roundtrip.dsns");
  save_checkpoint(model, {123, 4.5e-3}, path);
  const LoadedDsns loaded = load_dsns_checkpoint(path);
  CHECK(loaded.model.architecture() == model.architecture());
  CHECK(loaded.metadata.epochs == 123);
  CHECK(loaded.metadata.final_loss == 4.5e-3);
  Eigen::MatrixX3d inputs(3, 3);
  inputs << 0.1, 0.2, 0.0, 1.5, 3.0, 0.5, 3.0, 6.2, 1.0;
  CHECK(loaded.model.evaluate(inputs) == model.evaluate(inputs));

  const auto again = temp_path("roundtrip2.dsns");
  save_checkpoint(loaded.model, loaded.metadata, again);
  std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  CHECK(bytes_a == bytes_b);

  const WarpModel warp(5);
  const auto wpath = temp_path("warp.dsns");
  save_checkpoint(warp, {}, wpath);
  const LoadedWarp wl = load_warp_checkpoint(wpath);
  CHECK(wl.model.evaluate(0.37) == warp.evaluate(0.37));
  CHECK(std::isnan(wl.metadata.final_loss));
}

TEST_CASE("checkpoint errors are distinct") {
  const DsnsModel model = small_model(2);
  const auto path = temp_path("errors.dsns");
  save_checkpoint(model, {}, path);
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();

  auto write = [](const std::filesystem::path& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  };
  auto code_of = [](auto&& load) {
    try {
      load();
    } catch (const CheckpointError& e) {
      return e.code();
    }
    FAIL("expected a checkpoint error");
    return CheckpointError::Code::kIo;
  };

  const auto truncated = temp_path("truncated.dsns");
  write(truncated, bytes.substr(0, bytes.size() - 12));
  CHECK(code_of([&] { load_dsns_checkpoint(truncated); }) == CheckpointError::Code::kTruncatedPayload);

  std::string versioned = bytes;
  versioned[4] = 2;
  const auto v2 = temp_path("v2.dsns");
  write(v2, versioned);
  CHECK(code_of([&] { load_dsns_checkpoint(v2); }) == CheckpointError::Code::kVersionMismatch);

  std::string corrupt = bytes;
  corrupt[12] = '#';
  const auto bad_header = temp_path("corrupt.dsns");
  write(bad_header, corrupt);
  CHECK(code_of([&] { load_dsns_checkpoint(bad_header); }) == CheckpointError::Code::kCorruptHeader);

  const auto magic = temp_path("magic.dsns");
  write(magic, "NOPE" + bytes.substr(4));
  CHECK(code_of([&] { load_dsns_checkpoint(magic); }) == CheckpointError::Code::kBadMagic);

  CHECK(code_of([&] { load_warp_checkpoint(path); }) == CheckpointError::Code::kArchitectureMismatch);
  CHECK(code_of([&] { load_dsns_checkpoint(temp_path("missing.dsns")); }) == CheckpointError::Code::kIo);
}
