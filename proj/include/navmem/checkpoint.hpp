#pragma once

#include <string>

#include "navmem/models.hpp"

namespace navmem {

inline constexpr char kCheckpointMagic[9] = "NAVCKPT1";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

/// Magic, one-line JSON header (config, version, tensor table), then raw
/// little-endian float64 data in table order.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace navmem
