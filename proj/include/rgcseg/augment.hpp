#pragma once

// Joint augmentation of BEV feature maps and ground-truth masks.
//
// The composite S * M_Flip * M_Rot acts on homogeneous pixel coordinates
// (x = column, y = row) measured from the map centre. Output pixels pull from
// the inverse-mapped source location; features are sampled bilinearly and
// masks by nearest neighbour, both reading zero outside the canvas.

#include <array>
#include <random>

#include "rgcseg/random.hpp"
#include "rgcseg/tensor.hpp"

namespace rgcseg {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 rotation_matrix(double theta);
Mat3 flip_matrix(bool flip_x, bool flip_y);
Mat3 mat_mul(const Mat3& a, const Mat3& b);
// Throws std::domain_error for a singular matrix.
Mat3 mat_inverse(const Mat3& m);

// atan2(M^-1(2,1), M^-1(1,1)) with 1-based indices. For a pure rotation by
// theta this is -theta, the angle of the inverse rotation.
double recover_angle(const Mat3& rotation);

struct AugConfig {
  bool enabled = true;
  double max_rot_deg = 45.0;
  double flip_prob = 0.5;  // per axis
  double scale_min = 0.9;
  double scale_max = 1.1;

  void validate() const;  // throws std::invalid_argument
};

struct AugTransform {
  double theta = 0.0;
  bool flip_x = false;
  bool flip_y = false;
  double scale = 1.0;
  Mat3 rotation{};
  Mat3 flip{};
  double recovered_angle = 0.0;

  static AugTransform make(double theta, bool flip_x, bool flip_y, double scale);
  static AugTransform identity() { return make(0.0, false, false, 1.0); }
  bool is_identity() const {
    return theta == 0.0 && !flip_x && !flip_y && scale == 1.0;
  }
};

AugTransform sample_transform(Rng& rng, const AugConfig& config);

// bev: [N, C, H, W] (or [C, H, W]); every channel gets the same warp.
template <typename T>
Tensor<T> augment_bev(const Tensor<T>& bev, const AugTransform& t);

// masks: [K, H, W] (or [N, K, H, W]) with values in {0, 1}. The rotation is
// rebuilt from t.recovered_angle, so the ground truth follows the same
// geometry as the features.
template <typename T>
Tensor<T> augment_gt(const Tensor<T>& masks, const AugTransform& t);

}  // namespace rgcseg
