#pragma once

// Checkpoint = RGCT container holding every parameter under its own name and
// each momentum buffer under "momentum/<name>", plus a META record with the
// step, optimizer settings, model config and any extra run config.

#include <filesystem>

#include "rgcseg/config.hpp"
#include "rgcseg/container.hpp"
#include "rgcseg/model.hpp"

namespace rgcseg {

inline constexpr const char* kMomentumPrefix = "momentum/";

Container checkpoint_container(const TrainState& state, const KeyValues& extra = {});
void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const KeyValues& extra = {});

struct LoadedCheckpoint {
  TrainState state;
  KeyValues meta;  // the full echoed record
};

// Throws ContainerError on a malformed file and ConfigError when the stored
// tensors do not match the stored model config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rgcseg
