#include "rgcseg/augment.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rgcseg {
namespace {

// Sampling positions this close to a grid point are treated as exact; keeps
// 90-degree rotations and flips pure index permutations despite cos(pi/2) != 0.
constexpr double kSnap = 1e-6;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kSnap ? r : v;
}

struct InverseMap {
  // source = a * (dest - centre) + centre
  double a00, a01, a10, a11;
  double cx, cy;

  void source(std::size_t row, std::size_t col, double& sx, double& sy) const {
    const double qx = static_cast<double>(col) - cx;
    const double qy = static_cast<double>(row) - cy;
    sx = snap(a00 * qx + a01 * qy + cx);
    sy = snap(a10 * qx + a11 * qy + cy);
  }
};

InverseMap make_inverse(const Mat3& rotation, bool flip_x, bool flip_y, double scale,
                        std::size_t height, std::size_t width) {
  if (!(scale > 0.0)) throw std::invalid_argument("augmentation scale must be positive");
  const Mat3 fwd = mat_mul(flip_matrix(flip_x, flip_y), rotation);
  const Mat3 inv = mat_inverse(fwd);
  return {inv[0][0] / scale, inv[0][1] / scale, inv[1][0] / scale, inv[1][1] / scale,
          (static_cast<double>(width) - 1.0) / 2.0, (static_cast<double>(height) - 1.0) / 2.0};
}

struct Planes {
  std::size_t count, height, width;
};

Planes planes_of(const Shape& s, const char* what) {
  if (s.size() == 3) return {s[0], s[1], s[2]};
  if (s.size() == 4) return {s[0] * s[1], s[2], s[3]};
  throw ShapeError(std::string(what) + ": expected 3-D or 4-D tensor, got " + shape_str(s));
}

}  // namespace

Mat3 rotation_matrix(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {{{c, -s, 0.0}, {s, c, 0.0}, {0.0, 0.0, 1.0}}};
}

Mat3 flip_matrix(bool flip_x, bool flip_y) {
  return {{{flip_x ? -1.0 : 1.0, 0.0, 0.0}, {0.0, flip_y ? -1.0 : 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat3 mat_inverse(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-12) throw std::domain_error("matrix is singular");
  Mat3 inv{};
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

double recover_angle(const Mat3& rotation) {
  const Mat3 inv = mat_inverse(rotation);
  return std::atan2(inv[1][0], inv[0][0]);
}

void AugConfig::validate() const {
  if (!(max_rot_deg >= 0.0) || max_rot_deg > 180.0) {
    throw std::invalid_argument("aug.max_rot_deg must lie in [0, 180]");
  }
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
    throw std::invalid_argument("aug.flip_prob must lie in [0, 1]");
  }
  if (!(scale_min > 0.0) || !(scale_max >= scale_min)) {
    throw std::invalid_argument("aug scale range must satisfy 0 < scale_min <= scale_max");
  }
}

AugTransform AugTransform::make(double theta, bool flip_x, bool flip_y, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("augmentation scale must be positive");
  AugTransform t;
  t.theta = theta;
  t.flip_x = flip_x;
  t.flip_y = flip_y;
  t.scale = scale;
  t.rotation = rotation_matrix(theta);
  t.flip = flip_matrix(flip_x, flip_y);
  t.recovered_angle = recover_angle(t.rotation);
  return t;
}

AugTransform sample_transform(Rng& rng, const AugConfig& config) {
  config.validate();
  const double max_rot = config.max_rot_deg * std::numbers::pi / 180.0;
  // Draw order is fixed: angle, flip x, flip y, scale.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double theta = max_rot > 0.0 ? -max_rot + 2.0 * max_rot * unit(rng) : 0.0;
  const bool fx = unit(rng) < config.flip_prob;
  const bool fy = unit(rng) < config.flip_prob;
  const double s = unit(rng);
  const double scale = config.scale_min + (config.scale_max - config.scale_min) * s;
  return AugTransform::make(theta, fx, fy, scale);
}

template <typename T>
Tensor<T> augment_bev(const Tensor<T>& bev, const AugTransform& t) {
  const Planes p = planes_of(bev.shape(), "augment_bev");
  if (t.is_identity()) return bev;
  const InverseMap map = make_inverse(t.rotation, t.flip_x, t.flip_y, t.scale, p.height, p.width);
  const auto h = static_cast<long>(p.height), w = static_cast<long>(p.width);
  Tensor<T> out(bev.shape());
  auto tap = [&](const T* src, long y, long x) -> T {
    return (y < 0 || y >= h || x < 0 || x >= w) ? T{0} : src[y * w + x];
  };
  for (std::size_t row = 0; row < p.height; ++row) {
    for (std::size_t col = 0; col < p.width; ++col) {
      double sx, sy;
      map.source(row, col, sx, sy);
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
      const T ax = static_cast<T>(sx - fx0), ay = static_cast<T>(sy - fy0);
      const bool exact = ax == T{0} && ay == T{0};
      for (std::size_t k = 0; k < p.count; ++k) {
        const T* src = bev.data().data() + k * p.height * p.width;
        T v;
        if (exact) {
          v = tap(src, y0, x0);
        } else {
          const T top = tap(src, y0, x0) * (T{1} - ax) + tap(src, y0, x0 + 1) * ax;
          const T bot = tap(src, y0 + 1, x0) * (T{1} - ax) + tap(src, y0 + 1, x0 + 1) * ax;
          v = top * (T{1} - ay) + bot * ay;
        }
        out.data()[k * p.height * p.width + row * p.width + col] = v;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> augment_gt(const Tensor<T>& masks, const AugTransform& t) {
  const Planes p = planes_of(masks.shape(), "augment_gt");
  for (T v : masks.data()) {
    if (v != T{0} && v != T{1}) throw std::invalid_argument("augment_gt: masks must be binary");
  }
  if (t.is_identity()) return masks;
  const InverseMap map = make_inverse(rotation_matrix(-t.recovered_angle), t.flip_x, t.flip_y,
                                      t.scale, p.height, p.width);
  const auto h = static_cast<long>(p.height), w = static_cast<long>(p.width);
  Tensor<T> out(masks.shape());
  for (std::size_t row = 0; row < p.height; ++row) {
    for (std::size_t col = 0; col < p.width; ++col) {
      double sx, sy;
      map.source(row, col, sx, sy);
      const long x = static_cast<long>(std::floor(sx + 0.5));
      const long y = static_cast<long>(std::floor(sy + 0.5));
      if (x < 0 || x >= w || y < 0 || y >= h) continue;
      for (std::size_t k = 0; k < p.count; ++k) {
        const std::size_t base = k * p.height * p.width;
        out.data()[base + row * p.width + col] =
            masks.data()[base + static_cast<std::size_t>(y * w + x)];
      }
    }
  }
  return out;
}

template Tensor<float> augment_bev(const Tensor<float>&, const AugTransform&);
template Tensor<double> augment_bev(const Tensor<double>&, const AugTransform&);
template Tensor<float> augment_gt(const Tensor<float>&, const AugTransform&);
template Tensor<double> augment_gt(const Tensor<double>&, const AugTransform&);
template Tensor<std::uint8_t> augment_gt(const Tensor<std::uint8_t>&, const AugTransform&);

}  // namespace rgcseg
