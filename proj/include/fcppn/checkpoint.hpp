#pragma once

#include <cstddef>
#include <filesystem>

#include "fcppn/coordnet.hpp"
#include "fcppn/run_config.hpp"

namespace fcppn {

inline constexpr int kCheckpointVersion = 1;

// Trained parameters plus the run that produced them. Stored as an FCWT
// container: tensors "layer<l>.weight" / "layer<l>.bias" (the head is the
// last layer) and a JSON header
//   {"format": "fcppn-checkpoint", "version": 1, "base_width": W,
//    "base_height": H, "network": {...}, "config": {...}}.
struct Checkpoint {
  RunConfig config;
  std::size_t base_width = 0;
  std::size_t base_height = 0;
  Params<float> params;

  const NetworkConfig& network() const { return config.network; }
};

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& checkpoint);

// Throws IoError for unreadable files and ParseError for corrupt ones,
// including a header that disagrees with the stored tensors.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fcppn
