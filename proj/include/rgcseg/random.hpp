#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "rgcseg/tensor.hpp"

namespace rgcseg {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream for (seed, purpose); FNV-1a over the tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h ^ splitmix64(index)));
}

inline TensorF normal_tensor(Shape shape, double stddev, Rng& rng) {
  TensorF t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = static_cast<float>(dist(rng));
  return t;
}

inline TensorF uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  TensorF t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data()) v = static_cast<float>(dist(rng));
  return t;
}

// Kaiming-uniform for a conv weight [Cout, Cin, kh, kw]: U(-b, b) with
// b = gain * sqrt(3 / fan_in), fan_in = Cin * kh * kw.
inline TensorF kaiming_uniform(const Shape& conv_shape, double gain, Rng& rng) {
  const double fan_in = static_cast<double>(conv_shape.at(1) * conv_shape.at(2) * conv_shape.at(3));
  const double bound = gain * std::sqrt(3.0 / fan_in);
  return uniform_tensor(conv_shape, -bound, bound, rng);
}

}  // namespace rgcseg
