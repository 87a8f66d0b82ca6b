#include "rgcseg/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "rgcseg/config.hpp"
#include "rgcseg/container.hpp"
#include "rgcseg/random.hpp"

namespace rgcseg {
namespace {

constexpr int kMaxAttempts = 200;
constexpr std::size_t kMinClassPixels = 3;

// Rendered surface / paint intensities of each class.
constexpr float kSurfaceDrivable = 2.0f;
constexpr float kSurfaceCarpark = 1.4f;
constexpr float kSurfaceWalkway = 1.0f;
constexpr float kPaintLine = 2.0f;
constexpr float kPaintStop = -3.0f;
constexpr float kPaintCrossing = 1.2f;
constexpr double kBlurSigma = 0.5;
constexpr double kDividerHalfWidth = 1.5;

struct Road {
  double px, py;  // point on the centreline
  double ux, uy;  // along-road unit vector
  double half_width;
  bool has_crossing = false;
  double crossing_t = 0.0;

  double across(double x, double y) const { return (x - px) * -uy + (y - py) * ux; }
  double along(double x, double y) const { return (x - px) * ux + (y - py) * uy; }
};

struct Rect {
  double x0, y0, x1, y1;
};

// 3x3 separable Gaussian with edge clamping.
TensorF blur(const TensorF& plane, std::size_t h, std::size_t w) {
  const double side = std::exp(-1.0 / (2.0 * kBlurSigma * kBlurSigma));
  const double norm = 1.0 + 2.0 * side;
  const std::array<double, 3> k{side / norm, 1.0 / norm, side / norm};
  std::vector<double> tmp(h * w, 0.0);
  auto clampi = [](long v, long hi) { return std::min(std::max(v, 0L), hi); };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (int o = -1; o <= 1; ++o)
        s += k[o + 1] * plane[y * w + clampi(static_cast<long>(x) + o, static_cast<long>(w) - 1)];
      tmp[y * w + x] = s;
    }
  TensorF out({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (int o = -1; o <= 1; ++o)
        s += k[o + 1] * tmp[clampi(static_cast<long>(y) + o, static_cast<long>(h) - 1) * w + x];
      out[y * w + x] = static_cast<float>(s);
    }
  return out;
}

bool try_generate(Rng& rng, const SceneSpec& spec, SceneSample& out) {
  const std::size_t h = spec.height, w = spec.width;
  const double hs = static_cast<double>(std::min(h, w));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int road_count = spec.road_min + static_cast<int>(std::floor(
                                             unit(rng) * (spec.road_max - spec.road_min + 1)));
  std::vector<Road> roads;
  for (int r = 0; r < road_count; ++r) {
    Road road{};
    const double angle = uniform(0.0, std::numbers::pi);
    road.ux = std::cos(angle);
    road.uy = std::sin(angle);
    road.px = uniform(0.3, 0.7) * static_cast<double>(w);
    road.py = uniform(0.3, 0.7) * static_cast<double>(h);
    road.half_width = std::max(1.5, uniform(0.05, 0.09) * hs);
    road.has_crossing = r == 0 || unit(rng) < 0.7;
    road.crossing_t = uniform(-0.25, 0.25) * hs;
    roads.push_back(road);
  }
  const double walkway_width = std::max(1.5, 0.04 * hs);
  const double crossing_len = std::max(2.0, 0.12 * hs);
  const double stop_gap = 1.0;
  const double stop_len = std::max(1.0, 0.1 * hs);

  TensorF masks({kNumClasses, h, w});
  auto mask = [&](std::size_t k, std::size_t y, std::size_t x) -> float& {
    return masks[(k * h + y) * w + x];
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      bool drivable = false, near_road = false, crossing = false, stop = false, divider = false;
      for (const Road& road : roads) {
        const double a = road.across(fx, fy);
        const double t = road.along(fx, fy);
        const bool on = std::abs(a) <= road.half_width;
        drivable = drivable || on;
        near_road = near_road || std::abs(a) <= road.half_width + walkway_width;
        const double c0 = road.crossing_t - crossing_len / 2.0;
        const double c1 = road.crossing_t + crossing_len / 2.0;
        const bool in_crossing = road.has_crossing && on && t >= c0 && t <= c1;
        crossing = crossing || in_crossing;
        // Stop line spans one carriageway just before the crossing.
        const double divider_hw = std::min(kDividerHalfWidth, 0.5 * road.half_width);
        stop = stop || (road.has_crossing && on && a > divider_hw && t < c0 - stop_gap &&
                        t >= c0 - stop_gap - stop_len);
        divider = divider || (std::abs(a) <= divider_hw && !in_crossing);
      }
      mask(kDrivable, y, x) = drivable ? 1.0f : 0.0f;
      mask(kPedCrossing, y, x) = crossing ? 1.0f : 0.0f;
      mask(kStopLine, y, x) = stop && !crossing && !divider ? 1.0f : 0.0f;
      mask(kWalkway, y, x) = near_road && !drivable ? 1.0f : 0.0f;
      mask(kDivider, y, x) = divider && drivable ? 1.0f : 0.0f;
    }
  }

  // Car park: an axis-aligned rectangle clear of roads and walkways.
  if (unit(rng) < 0.85) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double rw = uniform(0.15, 0.3) * static_cast<double>(w);
      const double rh = uniform(0.15, 0.3) * static_cast<double>(h);
      const Rect rect{uniform(0.0, static_cast<double>(w) - rw), uniform(0.0, static_cast<double>(h) - rh),
                      0.0, 0.0};
      const auto x0 = static_cast<std::size_t>(rect.x0), y0 = static_cast<std::size_t>(rect.y0);
      const auto x1 = std::min(w, static_cast<std::size_t>(rect.x0 + rw));
      const auto y1 = std::min(h, static_cast<std::size_t>(rect.y0 + rh));
      bool clear = true;
      for (std::size_t y = y0 > 0 ? y0 - 1 : 0; y < std::min(h, y1 + 1) && clear; ++y)
        for (std::size_t x = x0 > 0 ? x0 - 1 : 0; x < std::min(w, x1 + 1); ++x)
          if (mask(kDrivable, y, x) != 0.0f || mask(kWalkway, y, x) != 0.0f) {
            clear = false;
            break;
          }
      if (!clear) continue;
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) mask(kCarpark, y, x) = 1.0f;
      break;
    }
  }

  for (std::size_t k = 0; k < kNumClasses; ++k) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < h * w; ++i) count += masks[k * h * w + i] != 0.0f;
    if (count < kMinClassPixels) return false;
  }

  TensorF surface({h, w}), paint({h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      float s = 0.0f;
      if (mask(kDrivable, y, x) != 0.0f) {
        s = kSurfaceDrivable;
      } else if (mask(kCarpark, y, x) != 0.0f) {
        s = kSurfaceCarpark;
      } else if (mask(kWalkway, y, x) != 0.0f) {
        s = kSurfaceWalkway;
      }
      surface[y * w + x] = s;
      float p = 0.0f;
      if (mask(kDivider, y, x) != 0.0f) {
        p = kPaintLine;
      } else if (mask(kStopLine, y, x) != 0.0f) {
        p = kPaintStop;
      } else if (mask(kPedCrossing, y, x) != 0.0f) {
        p = kPaintCrossing;
      }
      paint[y * w + x] = p;
    }
  }
  const TensorF geometry[2] = {blur(surface, h, w), blur(paint, h, w)};
  TensorF features({spec.in_channels, h, w});
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t c = 0; c < spec.in_channels; ++c) {
    for (std::size_t i = 0; i < h * w; ++i) {
      const double base = c < 2 ? geometry[c][i] : 0.0;
      features[c * h * w + i] = static_cast<float>(base + spec.noise_sigma * noise(rng));
    }
  }
  out.features = std::move(features);
  out.masks = std::move(masks);
  return true;
}

std::map<std::string, std::string> parse_manifest(const std::filesystem::path& path,
                                                  std::vector<std::string>& files) {
  std::ifstream is(path);
  if (!is) throw DatasetError(path.string() + ": cannot open manifest");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DatasetError(path.string() + ": malformed line '" + line + "'");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "file") {
      files.push_back(value);
    } else {
      kv[key] = value;
    }
  }
  return kv;
}

}  // namespace

void SceneSpec::validate() const {
  if (height < 16 || width < 16) throw std::invalid_argument("scene size must be at least 16x16");
  if (in_channels < 2) throw std::invalid_argument("scene needs at least 2 feature channels");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw std::invalid_argument("noise_sigma must be a finite non-negative number");
  }
  if (road_min < 1 || road_max < road_min) {
    throw std::invalid_argument("road count range must satisfy 1 <= min <= max");
  }
}

std::uint64_t sample_seed(std::uint64_t base_seed, std::size_t index) {
  return derive_seed(base_seed, "sample", index);
}

SceneSample generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  SceneSample s;
  s.seed = seed;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(seed, kGeneratorVersion, static_cast<std::uint64_t>(attempt)));
    if (try_generate(rng, spec, s)) {
      check_scene_invariants(s);
      return s;
    }
  }
  throw std::runtime_error("generate_scene: no scene with every class present after " +
                           std::to_string(kMaxAttempts) + " attempts (seed " +
                           std::to_string(seed) + ")");
}

void check_scene_invariants(const SceneSample& s) {
  const auto& m = s.masks;
  if (m.ndim() != 3 || m.dim(0) != kNumClasses) {
    throw std::logic_error("scene masks must be [6, H, W], got " + shape_str(m.shape()));
  }
  const std::size_t plane = m.dim(1) * m.dim(2);
  auto at = [&](std::size_t k, std::size_t i) { return m[k * plane + i]; };
  for (float v : m.data()) {
    if (v != 0.0f && v != 1.0f) throw std::logic_error("scene masks are not binary");
  }
  for (std::size_t i = 0; i < plane; ++i) {
    if (at(kPedCrossing, i) != 0.0f && at(kDrivable, i) == 0.0f) {
      throw std::logic_error("ped_crossing outside drivable_area");
    }
    if (at(kStopLine, i) != 0.0f && at(kDrivable, i) == 0.0f) {
      throw std::logic_error("stop_line outside drivable_area");
    }
    if (at(kWalkway, i) != 0.0f && at(kDrivable, i) != 0.0f) {
      throw std::logic_error("walkway overlaps drivable_area");
    }
  }
  if (!s.features.all_finite()) throw std::logic_error("scene features are not finite");
}

Dataset generate_dataset(std::uint64_t base_seed, std::size_t count, const SceneSpec& spec) {
  Dataset ds;
  ds.spec = spec;
  ds.base_seed = base_seed;
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ds.samples.push_back(generate_scene(sample_seed(base_seed, i), spec));
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DatasetError(dir.string() + ": cannot create directory: " + ec.message());
  std::ostringstream manifest;
  manifest << "count=" << ds.samples.size() << '\n'
           << "version=" << kGeneratorVersion << '\n'
           << "seed=" << ds.base_seed << '\n'
           << "height=" << ds.spec.height << '\n'
           << "width=" << ds.spec.width << '\n'
           << "cin=" << ds.spec.in_channels << '\n'
           << "noise_sigma=" << format_double(ds.spec.noise_sigma) << '\n'
           << "road_min=" << ds.spec.road_min << '\n'
           << "road_max=" << ds.spec.road_max << '\n';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%06zu.rgct", i);
    const auto& s = ds.samples[i];
    Container c;
    c.tensors.push_back({"features", s.features});
    c.tensors.push_back({"masks", s.masks});
    c.metadata = "seed=" + std::to_string(s.seed) + "\nversion=" + s.version + "\n";
    save_container(dir / name, c);
    manifest << "file=" << name << '\n';
  }
  std::ofstream os(dir / "manifest.txt", std::ios::trunc);
  if (!os) throw DatasetError((dir / "manifest.txt").string() + ": cannot write");
  os << manifest.str();
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::vector<std::string> files;
  const auto manifest_path = dir / "manifest.txt";
  const auto kv = parse_manifest(manifest_path, files);
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DatasetError(manifest_path.string() + ": missing key '" + key + "'");
    return it->second;
  };
  if (need("version") != kGeneratorVersion) {
    throw DatasetError(manifest_path.string() + ": generator version '" + need("version") +
                       "' does not match '" + std::string(kGeneratorVersion) + "'");
  }
  Dataset ds;
  try {
    ds.base_seed = std::stoull(need("seed"));
    ds.spec.height = std::stoul(need("height"));
    ds.spec.width = std::stoul(need("width"));
    ds.spec.in_channels = std::stoul(need("cin"));
    ds.spec.noise_sigma = std::stod(need("noise_sigma"));
    ds.spec.road_min = std::stoi(need("road_min"));
    ds.spec.road_max = std::stoi(need("road_max"));
  } catch (const std::logic_error& e) {
    throw DatasetError(manifest_path.string() + ": malformed value (" + e.what() + ")");
  }
  const std::size_t count = std::stoul(need("count"));
  std::size_t present = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("sample_", 0) == 0 && entry.path().extension() == ".rgct") ++present;
  }
  if (count != files.size() || count != present) {
    throw DatasetError(manifest_path.string() + ": manifest count " + std::to_string(count) +
                       " but " + std::to_string(files.size()) + " listed and " +
                       std::to_string(present) + " sample files present");
  }
  const Shape feat_shape{ds.spec.in_channels, ds.spec.height, ds.spec.width};
  const Shape mask_shape{kNumClasses, ds.spec.height, ds.spec.width};
  ds.samples.reserve(count);
  for (const auto& f : files) {
    const auto path = dir / f;
    Container c;
    try {
      c = load_container(path);
    } catch (const ContainerError& e) {
      throw DatasetError(e.what());
    }
    SceneSample s;
    try {
      s.features = c.get_f32("features");
      s.masks = c.get_f32("masks");
    } catch (const ContainerError& e) {
      throw DatasetError(path.string() + ": " + e.what());
    }
    if (s.features.shape() != feat_shape || s.masks.shape() != mask_shape) {
      throw DatasetError(path.string() + ": tensor shapes " + shape_str(s.features.shape()) + "/" +
                         shape_str(s.masks.shape()) + " disagree with manifest");
    }
    if (c.metadata) {
      std::istringstream ms(*c.metadata);
      std::string line;
      while (std::getline(ms, line)) {
        if (line.rfind("seed=", 0) == 0) s.seed = std::stoull(line.substr(5));
        if (line.rfind("version=", 0) == 0) s.version = line.substr(8);
      }
    }
    if (s.version != kGeneratorVersion) {
      throw DatasetError(path.string() + ": generator version mismatch");
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace rgcseg
