#include "elastica4d/checkpoint.hpp"

#include "binary_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <vector>

namespace e4d {

namespace {

using nlohmann::json;
using Code = CheckpointError::Code;

constexpr char kMagic[4] = {'D', 'S', 'N', 'S'};

json parameter_shapes(const ResidualMlp& mlp) {
  json shapes = json::array();
  for (const Eigen::MatrixXd* p : mlp.parameters()) shapes.push_back({p->rows(), p->cols()});
  return shapes;
}

json metadata_json(const TrainingMetadata& meta) {
  json m{{"epochs", meta.epochs}};
  m["final_loss"] = std::isfinite(meta.final_loss) ? json(meta.final_loss) : json(nullptr);
  return m;
}

void write_file(const std::filesystem::path& path, const json& header, const ResidualMlp& mlp) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Code::kIo, "checkpoint: cannot open '" + path.string() + "' for writing");
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  detail::write_u32(out, kCheckpointVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Eigen::MatrixXd* p : mlp.parameters()) detail::write_f64(out, p->data(), static_cast<std::size_t>(p->size()));
  if (!out) throw CheckpointError(Code::kIo, "checkpoint: write to '" + path.string() + "' failed");
}

struct RawCheckpoint {
  json header;
  std::ifstream stream;
};

RawCheckpoint open_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw{json(), std::ifstream(path, std::ios::binary)};
  std::ifstream& in = raw.stream;
  if (!in) throw CheckpointError(Code::kIo, "checkpoint: cannot open '" + path.string() + "'");
  char magic[4];
  if (!detail::read_bytes(in, magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError(Code::kBadMagic, "checkpoint: '" + path.string() + "' is not a DSNS file");
  }
  std::uint32_t version = 0;
  std::uint32_t length = 0;
  if (!detail::read_u32(in, version)) throw CheckpointError(Code::kCorruptHeader, "checkpoint: missing version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Code::kVersionMismatch, "checkpoint: file version " + std::to_string(version) +
                                                      ", reader supports " + std::to_string(kCheckpointVersion));
  }
  if (!detail::read_u32(in, length)) throw CheckpointError(Code::kCorruptHeader, "checkpoint: missing header length");
  std::string text(length, '\0');
  if (!detail::read_bytes(in, text.data(), length)) {
    throw CheckpointError(Code::kCorruptHeader, "checkpoint: header shorter than its declared length");
  }
  try {
    raw.header = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(Code::kCorruptHeader, std::string("checkpoint: unreadable header: ") + e.what());
  }
  return raw;
}

TrainingMetadata read_metadata(const json& header) {
  TrainingMetadata meta;
  const json& m = header.at("metadata");
  meta.epochs = m.at("epochs").get<int>();
  meta.final_loss = m.at("final_loss").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                 : m.at("final_loss").get<double>();
  return meta;
}

void read_parameters(RawCheckpoint& raw, ResidualMlp& mlp) {
  if (raw.header.at("parameters") != parameter_shapes(mlp)) {
    throw CheckpointError(Code::kArchitectureMismatch, "checkpoint: parameter shapes do not match the architecture");
  }
  for (Eigen::MatrixXd* p : mlp.parameters()) {
    if (!detail::read_f64(raw.stream, p->data(), static_cast<std::size_t>(p->size()))) {
      throw CheckpointError(Code::kTruncatedPayload, "checkpoint: parameter payload is truncated");
    }
  }
  char extra;
  if (detail::read_bytes(raw.stream, &extra, 1)) {
    throw CheckpointError(Code::kCorruptHeader, "checkpoint: trailing bytes after the payload");
  }
}

template <typename F>
auto with_header_errors(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw CheckpointError(Code::kCorruptHeader, std::string("checkpoint: malformed header: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const DsnsModel& model, const TrainingMetadata& meta, const std::filesystem::path& path) {
  const DsnsArchitecture& arch = model.architecture();
  const json header{{"kind", "dsns"},
                    {"blocks", arch.blocks},
                    {"width", arch.width},
                    {"encoding",
                     {{"spatial_frequencies", arch.encoding.spatial_frequencies},
                      {"temporal_frequencies", arch.encoding.temporal_frequencies},
                      {"include_raw_input", arch.encoding.include_raw_input}}},
                    {"parameters", parameter_shapes(model.mlp())},
                    {"metadata", metadata_json(meta)}};
  write_file(path, header, model.mlp());
}

void save_checkpoint(const WarpModel& model, const TrainingMetadata& meta, const std::filesystem::path& path) {
  const json header{{"kind", "warp"},
                    {"blocks", WarpModel::kBlocks},
                    {"width", WarpModel::kWidth},
                    {"parameters", parameter_shapes(model.mlp())},
                    {"metadata", metadata_json(meta)}};
  write_file(path, header, model.mlp());
}

LoadedDsns load_dsns_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw = open_checkpoint(path);
  return with_header_errors([&] {
    const json& h = raw.header;
    if (h.at("kind") != "dsns") {
      throw CheckpointError(Code::kArchitectureMismatch, "checkpoint: expected a dsns model, found '" +
                                                             h.at("kind").get<std::string>() + "'");
    }
    DsnsArchitecture arch;
    arch.blocks = h.at("blocks").get<int>();
    arch.width = h.at("width").get<int>();
    const json& e = h.at("encoding");
    arch.encoding.spatial_frequencies = e.at("spatial_frequencies").get<int>();
    arch.encoding.temporal_frequencies = e.at("temporal_frequencies").get<int>();
    arch.encoding.include_raw_input = e.at("include_raw_input").get<bool>();
    if (arch.blocks < 0 || arch.width < 1 || arch.encoding.spatial_frequencies < 0 ||
        arch.encoding.temporal_frequencies < 0 || arch.encoding.dimension() < 1) {
      throw CheckpointError(Code::kArchitectureMismatch, "checkpoint: invalid architecture descriptor");
    }
    LoadedDsns loaded{DsnsModel(arch, 0), read_metadata(h)};
    read_parameters(raw, loaded.model.mlp());
    return loaded;
  });
}

LoadedWarp load_warp_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw = open_checkpoint(path);
  return with_header_errors([&] {
    const json& h = raw.header;
    if (h.at("kind") != "warp" || h.at("blocks") != WarpModel::kBlocks || h.at("width") != WarpModel::kWidth) {
      throw CheckpointError(Code::kArchitectureMismatch, "checkpoint: not a warp model of the supported shape");
    }
    LoadedWarp loaded{WarpModel(0), read_metadata(h)};
    read_parameters(raw, loaded.model.mlp());
    return loaded;
  });
}

}  // namespace e4d
