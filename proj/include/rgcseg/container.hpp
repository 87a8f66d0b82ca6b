#pragma once

// "RGCT" tensor container shared by datasets and checkpoints.
//
//   magic "RGCT" | version u32 | count u32
//   per tensor: name_len u16 | name utf-8 | ndim u8 | dims u32[ndim] | dtype u8 | payload
//   optional trailer: "META" | len u32 | utf-8 key=value lines
//
// All integers and payloads are little-endian. dtype: 0 = f32, 1 = f64, 2 = u8.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rgcseg/tensor.hpp"

namespace rgcseg {

inline constexpr std::uint32_t kContainerVersion = 1;

class ContainerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using AnyTensor = std::variant<TensorF, TensorD, TensorU8>;

struct NamedTensor {
  std::string name;
  AnyTensor tensor;
};

struct Container {
  std::vector<NamedTensor> tensors;
  std::optional<std::string> metadata;

  const AnyTensor* find(const std::string& name) const;
  // Fetches an f32 tensor by name; f64 and u8 payloads are converted.
  TensorF get_f32(const std::string& name) const;
};

void write_container(std::ostream& os, const Container& c);
Container read_container(std::istream& is, const std::string& source = "<stream>");

// File variants; errors name the path. save_container writes through a
// temporary file and renames, so a crash never leaves a torn file behind.
void save_container(const std::filesystem::path& path, const Container& c);
Container load_container(const std::filesystem::path& path);

}  // namespace rgcseg
