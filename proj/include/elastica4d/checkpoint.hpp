#pragma once

#include "elastica4d/networks.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>

namespace e4d {

/// File layout: "DSNS", u32 LE version, u32 LE header length, JSON header
/// describing the architecture, then every parameter as raw LE f64 in
/// ResidualMlp::parameters() order (column-major within a matrix).
class CheckpointError : public std::runtime_error {
 public:
  enum class Code { kIo, kBadMagic, kCorruptHeader, kVersionMismatch, kArchitectureMismatch, kTruncatedPayload };

  CheckpointError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMetadata {
  int epochs = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
};

void save_checkpoint(const DsnsModel& model, const TrainingMetadata& meta, const std::filesystem::path& path);
void save_checkpoint(const WarpModel& model, const TrainingMetadata& meta, const std::filesystem::path& path);

struct LoadedDsns {
  DsnsModel model;
  TrainingMetadata metadata;
};
struct LoadedWarp {
  WarpModel model;
  TrainingMetadata metadata;
};

LoadedDsns load_dsns_checkpoint(const std::filesystem::path& path);
LoadedWarp load_warp_checkpoint(const std::filesystem::path& path);

}  // namespace e4d
