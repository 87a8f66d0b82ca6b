#pragma once

// Procedural BEV scenes: straight road corridors with dividers, crossings
// and stop lines, flanking walkways and off-road car parks. Features are
// rendered directly in BEV space.

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rgcseg/tensor.hpp"

namespace rgcseg {

inline constexpr std::size_t kNumClasses = 6;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "drivable_area", "ped_crossing", "walkway", "stop_line", "carpark_area", "divider"};
enum ClassId : std::size_t {
  kDrivable = 0,
  kPedCrossing = 1,
  kWalkway = 2,
  kStopLine = 3,
  kCarpark = 4,
  kDivider = 5,
};

inline constexpr std::string_view kGeneratorVersion = "synth-v2";

struct SceneSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t in_channels = 4;  // 2 geometry + (in_channels - 2) noise
  double noise_sigma = 0.1;
  int road_min = 1;
  int road_max = 3;

  void validate() const;  // throws std::invalid_argument
};

struct SceneSample {
  TensorF features;  // [Cin, H, W]
  TensorF masks;     // [K, H, W], values in {0, 1}
  std::uint64_t seed = 0;
  std::string version{kGeneratorVersion};
};

SceneSample generate_scene(std::uint64_t seed, const SceneSpec& spec);

// Throws std::logic_error naming the violated constraint:
// binary masks, ped_crossing and stop_line inside drivable_area,
// walkway disjoint from drivable_area, finite features.
void check_scene_invariants(const SceneSample& s);

// Seed of sample `index` in a dataset generated from `base_seed`.
std::uint64_t sample_seed(std::uint64_t base_seed, std::size_t index);

struct Dataset {
  SceneSpec spec;
  std::uint64_t base_seed = 0;
  std::vector<SceneSample> samples;
};

Dataset generate_dataset(std::uint64_t base_seed, std::size_t count, const SceneSpec& spec);

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One sample_%06d.rgct per sample plus manifest.txt (key=value lines and a
// file= entry per sample).
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace rgcseg
