#pragma once

#include <cstdint>
#include <filesystem>

#include "spad/model.hpp"
#include "spad/spl.hpp"
#include "spad/train_config.hpp"

namespace spad {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Everything needed to continue a run exactly where it stopped.
struct Checkpoint {
  int schema_version = kCheckpointSchemaVersion;
  std::int64_t epoch = 0;        // completed epochs
  std::int64_t global_step = 0;  // mini-batches processed so far
  ArchitectureDescriptor architecture;
  ParamSet<float> params;
  ParamSet<float> momentum;  // SGD momentum buffers, same layout as params
  SplState spl;
  TrainConfig config;
  std::uint64_t seed = 0;  // data order for epoch e is derived from (seed, e)

  ConvAutoencoder<float> model() const;
};

/// Archive layout (little endian):
///   "SPADCKPT" | u32 format version | u32 member count |
///   per member: u32 name length | name | u64 payload length | payload | u32 crc32(payload)
/// Members: "meta.json", "architecture.json", "params/<name>", "momentum/<name>".
/// Arrays are raw float32; dtype and shape are listed in meta.json.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws CheckpointError naming the offending archive member on corruption,
/// truncation or schema mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spad
