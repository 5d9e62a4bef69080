#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vqwave/nn/layers.hpp"

namespace vqwave::nn {

// Binary checkpoint layout (all integers and floats little-endian):
//   magic "VQWK" | u32 version (1)
//   u32 config_length | config bytes (flat key = value text)
//   i64 optimizer_step
//   u32 entry_count, then per entry:
//     u32 name_length | name | u8 kind (0 parameter, 1 buffer)
//     u32 ndim | u64 dims[ndim] | f64 values[prod(dims)]
//     kind 0 only: f64 adam_m[prod(dims)] | f64 adam_v[prod(dims)]

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  bool is_parameter = false;
  Tensor value;
  Tensor adam_m;
  Tensor adam_v;
};

struct Checkpoint {
  std::string config_text;
  std::int64_t optimizer_step = 0;
  std::map<std::string, CheckpointEntry> entries;

  /// Captures every registered tensor (parameters with their Adam moments).
  static Checkpoint capture(const StateRegistry& reg, std::string config_text, std::int64_t optimizer_step);
  /// Copies stored tensors into `reg`, validating that names and shapes match exactly.
  void restore(const StateRegistry& reg) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vqwave::nn
