#include "elastica4d/container.hpp"

#include "binary_io.hpp"

#include <cstdio>
#include <fstream>

namespace e4d {

namespace {

using nlohmann::json;
using Code = ContainerError::Code;

constexpr char kMagic[4] = {'S', '4', 'D', '1'};

}  // namespace

void write_container(const SampledSequence4D& seq, const std::filesystem::path& path, const json& provenance) {
  const SphereGrid& g = seq.grid;
  for (const auto& f : seq.frames) {
    if (f.rows() != g.size()) throw ContainerError(Code::kShapeMismatch, "container: frame does not match its grid");
  }
  if (seq.times.size() != seq.frames.size()) {
    throw ContainerError(Code::kShapeMismatch, "container: time and frame counts differ");
  }
  const json header{{"name", seq.name},
                    {"H", g.rows()},
                    {"W", g.cols()},
                    {"K", seq.frame_count()},
                    {"times", seq.times},
                    {"scale", seq.scale},
                    {"offset", {seq.offset.x(), seq.offset.y(), seq.offset.z()}},
                    {"provenance", provenance}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContainerError(Code::kIo, "container: cannot open '" + path.string() + "' for writing");
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  detail::write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& f : seq.frames) {
    // Row-major samples, xyz innermost.
    const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> rows = f;
    detail::write_f64(out, rows.data(), static_cast<std::size_t>(rows.size()));
  }
  if (!out) throw ContainerError(Code::kIo, "container: write to '" + path.string() + "' failed");
}

LoadedContainer read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerError(Code::kIo, "container: cannot open '" + path.string() + "'");
  char magic[4];
  if (!detail::read_bytes(in, magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ContainerError(Code::kBadMagic, "container: '" + path.string() + "' is not an S4D1 file");
  }
  std::uint32_t length = 0;
  if (!detail::read_u32(in, length)) throw ContainerError(Code::kCorruptHeader, "container: missing header length");
  std::string text(length, '\0');
  if (!detail::read_bytes(in, text.data(), length)) {
    throw ContainerError(Code::kCorruptHeader, "container: header shorter than its declared length");
  }
  LoadedContainer loaded;
  int h = 0, w = 0, k = 0;
  try {
    const json header = json::parse(text);
    h = header.at("H").get<int>();
    w = header.at("W").get<int>();
    k = header.at("K").get<int>();
    loaded.sequence.name = header.at("name").get<std::string>();
    loaded.sequence.times = header.at("times").get<std::vector<double>>();
    loaded.sequence.scale = header.at("scale").get<double>();
    const auto offset = header.at("offset").get<std::vector<double>>();
    if (offset.size() != 3) throw ContainerError(Code::kCorruptHeader, "container: offset must have three entries");
    loaded.sequence.offset = Eigen::Vector3d(offset[0], offset[1], offset[2]);
    loaded.provenance = header.value("provenance", json::object());
  } catch (const json::exception& e) {
    throw ContainerError(Code::kCorruptHeader, std::string("container: malformed header: ") + e.what());
  }
  if (h < 1 || w < 1 || k < 0 || loaded.sequence.times.size() != static_cast<std::size_t>(k)) {
    throw ContainerError(Code::kShapeMismatch, "container: header K, H, W and times disagree");
  }
  loaded.sequence.grid = SphereGrid(h, w);
  for (int f = 0; f < k; ++f) {
    Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> rows(static_cast<Eigen::Index>(h) * w, 3);
    if (!detail::read_f64(in, rows.data(), static_cast<std::size_t>(rows.size()))) {
      throw ContainerError(Code::kTruncatedPayload, "container: payload shorter than K*H*W*3 doubles");
    }
    loaded.sequence.frames.emplace_back(rows);
  }
  char extra;
  if (detail::read_bytes(in, &extra, 1)) {
    throw ContainerError(Code::kShapeMismatch, "container: payload longer than K*H*W*3 doubles");
  }
  return loaded;
}

std::vector<std::filesystem::path> export_obj(const SampledSequence4D& seq, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ContainerError(Code::kIo, "export_obj: cannot create '" + dir.string() + "': " + ec.message());
  const SphereGrid& g = seq.grid;
  const int digits = std::max<int>(4, static_cast<int>(std::to_string(std::max(0, seq.frame_count() - 1)).size()));
  std::vector<std::filesystem::path> paths;
  char line[128];
  for (int k = 0; k < seq.frame_count(); ++k) {
    std::string index = std::to_string(k);
    index.insert(0, static_cast<std::size_t>(digits) - index.size(), '0');
    const auto path = dir / ("frame_" + index + ".obj");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ContainerError(Code::kIo, "export_obj: cannot write '" + path.string() + "'");
    const Eigen::MatrixX3d& f = seq.frames[static_cast<std::size_t>(k)];
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", f(r, 0), f(r, 1), f(r, 2));
      out << line;
    }
    // OBJ indices are 1-based.
    const auto id = [&](int i, int j) { return g.index(i, j % g.cols()) + 1; };
    for (int i = 0; i + 1 < g.rows(); ++i) {
      for (int j = 0; j < g.cols(); ++j) {
        out << "f " << id(i, j) << ' ' << id(i + 1, j) << ' ' << id(i, j + 1) << '\n';
        out << "f " << id(i, j + 1) << ' ' << id(i + 1, j) << ' ' << id(i + 1, j + 1) << '\n';
      }
    }
    if (!out) throw ContainerError(Code::kIo, "export_obj: write to '" + path.string() + "' failed");
    paths.push_back(path);
  }
  return paths;
}

}  // namespace e4d
