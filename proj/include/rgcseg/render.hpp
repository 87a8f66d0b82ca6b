#pragma once

// Binary PGM masks (0/255) and a composite PPM with a fixed class palette.
// Composite pixels take the colour of the highest-index class present, so thin
// classes drawn on top of drivable area stay visible; background is black.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rgcseg/model.hpp"
#include "rgcseg/synth.hpp"
#include "rgcseg/tensor.hpp"

namespace rgcseg {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr std::array<Rgb, kNumClasses> kClassPalette = {{
    {128, 128, 128},  // drivable_area
    {255, 255, 255},  // ped_crossing
    {0, 160, 0},      // walkway
    {255, 0, 0},      // stop_line
    {0, 96, 255},     // carpark_area
    {255, 200, 0},    // divider
}};

// plane: [H, W]; nonzero -> 255.
std::string encode_pgm(const TensorF& plane);
// masks: [K, H, W].
std::string encode_composite_ppm(const TensorF& masks);

// Logits -> binary masks at logit >= 0.
TensorF threshold_logits(const TensorF& logits);

// Writes sample_<i>_pred_<class>.pgm, sample_<i>_gt_<class>.pgm and
// sample_<i>_composite.ppm (prediction left, ground truth right, 2 px gap)
// for the first `num` samples. Returns the written paths.
std::vector<std::filesystem::path> render_samples(const ModelConfig& cfg,
                                                  const ParamMap<float>& params,
                                                  const std::vector<SceneSample>& samples,
                                                  std::size_t num,
                                                  const std::filesystem::path& out_dir);

}  // namespace rgcseg
