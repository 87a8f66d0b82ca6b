#include "rgcseg/container.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace rgcseg {
namespace {

constexpr std::array<char, 4> kMagic{'R', 'G', 'C', 'T'};
constexpr std::array<char, 4> kMetaMagic{'M', 'E', 'T', 'A'};

template <typename U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> b{};
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), b.size());
}

template <typename U>
U get_le(std::istream& is, const std::string& src) {
  std::array<unsigned char, sizeof(U)> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw ContainerError(src + ": truncated container");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

template <typename T>
void put_payload(std::ostream& os, const Tensor<T>& t) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.numel() * sizeof(T)));
  } else {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    for (T v : t.data()) put_le(os, std::bit_cast<U>(v));
  }
}

template <typename T>
Tensor<T> get_payload(std::istream& is, Shape shape, const std::string& src) {
  Tensor<T> t(std::move(shape));
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    if (!is.read(reinterpret_cast<char*>(t.data().data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(T)))) {
      throw ContainerError(src + ": truncated tensor payload");
    }
  } else {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    for (auto& v : t.data()) v = std::bit_cast<T>(get_le<U>(is, src));
  }
  return t;
}

}  // namespace

const AnyTensor* Container::find(const std::string& name) const {
  for (const auto& nt : tensors) {
    if (nt.name == name) return &nt.tensor;
  }
  return nullptr;
}

TensorF Container::get_f32(const std::string& name) const {
  const AnyTensor* t = find(name);
  if (!t) throw ContainerError("container has no tensor named '" + name + "'");
  return std::visit(
      [](const auto& x) -> TensorF {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, TensorF>) {
          return x;
        } else {
          return x.template cast<float>();
        }
      },
      *t);
}

void write_container(std::ostream& os, const Container& c) {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kContainerVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& nt : c.tensors) {
    if (nt.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ContainerError("tensor name too long: " + nt.name.substr(0, 32) + "...");
    }
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(nt.name.size()));
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    std::visit(
        [&](const auto& t) {
          using T = typename std::decay_t<decltype(t)>::value_type;
          if (t.ndim() > 255) throw ContainerError("tensor '" + nt.name + "' has too many dims");
          put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.ndim()));
          for (auto d : t.shape()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
          std::uint8_t tag = std::is_same_v<T, float> ? 0 : std::is_same_v<T, double> ? 1 : 2;
          put_le<std::uint8_t>(os, tag);
          put_payload(os, t);
        },
        nt.tensor);
  }
  if (c.metadata) {
    os.write(kMetaMagic.data(), kMetaMagic.size());
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.metadata->size()));
    os.write(c.metadata->data(), static_cast<std::streamsize>(c.metadata->size()));
  }
}

Container read_container(std::istream& is, const std::string& src) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ContainerError(src + ": not an RGCT container (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(is, src);
  if (version != kContainerVersion) {
    throw ContainerError(src + ": unsupported container version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(is, src);
  Container c;
  c.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get_le<std::uint16_t>(is, src);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw ContainerError(src + ": truncated tensor name");
    const auto ndim = get_le<std::uint8_t>(is, src);
    Shape shape(ndim);
    for (auto& d : shape) d = get_le<std::uint32_t>(is, src);
    const auto tag = get_le<std::uint8_t>(is, src);
    switch (tag) {
      case 0: c.tensors.push_back({std::move(name), get_payload<float>(is, shape, src)}); break;
      case 1: c.tensors.push_back({std::move(name), get_payload<double>(is, shape, src)}); break;
      case 2: c.tensors.push_back({std::move(name), get_payload<std::uint8_t>(is, shape, src)}); break;
      default:
        throw ContainerError(src + ": unknown dtype tag " + std::to_string(tag) + " for tensor '" +
                             name + "'");
    }
  }
  std::array<char, 4> trailer{};
  is.read(trailer.data(), trailer.size());
  if (is.gcount() == 0) return c;
  if (is.gcount() != 4 || trailer != kMetaMagic) {
    throw ContainerError(src + ": unexpected bytes after tensor records");
  }
  const auto len = get_le<std::uint32_t>(is, src);
  std::string meta(len, '\0');
  if (!is.read(meta.data(), len)) throw ContainerError(src + ": truncated metadata record");
  c.metadata = std::move(meta);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw ContainerError(src + ": unexpected bytes after metadata record");
  }
  return c;
}

void save_container(const std::filesystem::path& path, const Container& c) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ContainerError(path.string() + ": cannot open for writing");
    write_container(os, c);
    if (!os.flush()) throw ContainerError(path.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ContainerError(path.string() + ": rename failed: " + ec.message());
}

Container load_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContainerError(path.string() + ": cannot open");
  return read_container(is, path.string());
}

}  // namespace rgcseg
