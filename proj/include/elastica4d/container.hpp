#pragma once

#include "elastica4d/sequence.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace e4d {

class ContainerError : public std::runtime_error {
 public:
  enum class Code { kIo, kBadMagic, kCorruptHeader, kShapeMismatch, kTruncatedPayload };
  ContainerError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// "S4D1", u32 LE header length, JSON header {name, H, W, K, times, scale,
/// offset, provenance}, then K*H*W*3 LE f64 ordered (frame, u, v, xyz).
void write_container(const SampledSequence4D& seq, const std::filesystem::path& path,
                     const nlohmann::json& provenance = nlohmann::json::object());

struct LoadedContainer {
  SampledSequence4D sequence;
  nlohmann::json provenance;
};
LoadedContainer read_container(const std::filesystem::path& path);

/// One OBJ per frame, frame_0000.obj and so on. Vertices are the grid points;
/// each quad between rows i and i + 1 becomes two outward-facing triangles,
/// with column W - 1 joined back to column 0. Pole caps are left open, so a
/// frame is a cylinder: V = HW, F = 2W(H - 1), E = HW + 2W(H - 1), chi = 0.
std::vector<std::filesystem::path> export_obj(const SampledSequence4D& seq, const std::filesystem::path& dir);

}  // namespace e4d
