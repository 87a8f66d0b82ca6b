#include "rgcseg/render.hpp"

#include <cstdio>
#include <fstream>

namespace rgcseg {
namespace {

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

std::string header(const char* magic, std::size_t w, std::size_t h) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

Rgb composite_pixel(const TensorF& masks, std::size_t y, std::size_t x) {
  Rgb px{0, 0, 0};
  const std::size_t plane = masks.dim(1) * masks.dim(2);
  const std::size_t offset = y * masks.dim(2) + x;
  for (std::size_t c = 0; c < masks.dim(0) && c < kClassPalette.size(); ++c) {
    if (masks[c * plane + offset] != 0.0f) px = kClassPalette[c];
  }
  return px;
}

}  // namespace

std::string encode_pgm(const TensorF& plane) {
  if (plane.ndim() != 2) throw ShapeError("encode_pgm: expected [H,W], got " + shape_str(plane.shape()));
  std::string out = header("P5", plane.dim(1), plane.dim(0));
  for (float v : plane.vec()) out.push_back(static_cast<char>(v != 0.0f ? 255 : 0));
  return out;
}

std::string encode_composite_ppm(const TensorF& masks) {
  if (masks.ndim() != 3) {
    throw ShapeError("encode_composite_ppm: expected [K,H,W], got " + shape_str(masks.shape()));
  }
  const std::size_t h = masks.dim(1), w = masks.dim(2);
  std::string out = header("P6", w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (auto ch : composite_pixel(masks, y, x)) out.push_back(static_cast<char>(ch));
    }
  }
  return out;
}

TensorF threshold_logits(const TensorF& logits) {
  TensorF out(logits.shape());
  for (std::size_t i = 0; i < logits.numel(); ++i) out[i] = logits[i] >= 0.0f ? 1.0f : 0.0f;
  return out;
}

std::vector<std::filesystem::path> render_samples(const ModelConfig& cfg,
                                                  const ParamMap<float>& params,
                                                  const std::vector<SceneSample>& samples,
                                                  std::size_t num,
                                                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  const std::size_t gap = 2;
  for (std::size_t i = 0; i < num && i < samples.size(); ++i) {
    const TensorF& gt = samples[i].masks;
    const std::size_t k = gt.dim(0), h = gt.dim(1), w = gt.dim(2);
    const TensorF pred = threshold_logits(predict_logits(cfg, params, samples[i].features))
                             .reshaped({k, h, w});
    char stem[32];
    std::snprintf(stem, sizeof(stem), "sample_%06zu", i);
    for (std::size_t c = 0; c < k; ++c) {
      const std::string cls = c < kClassNames.size() ? std::string(kClassNames[c])
                                                      : "class" + std::to_string(c);
      TensorF p({h, w}), g({h, w});
      std::copy_n(pred.vec().begin() + static_cast<std::ptrdiff_t>(c * h * w), h * w,
                  p.data().begin());
      std::copy_n(gt.vec().begin() + static_cast<std::ptrdiff_t>(c * h * w), h * w,
                  g.data().begin());
      written.push_back(out_dir / (std::string(stem) + "_pred_" + cls + ".pgm"));
      write_file(written.back(), encode_pgm(p));
      written.push_back(out_dir / (std::string(stem) + "_gt_" + cls + ".pgm"));
      write_file(written.back(), encode_pgm(g));
    }
    std::string ppm = header("P6", 2 * w + gap, h);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < 2 * w + gap; ++x) {
        Rgb px{32, 32, 32};
        if (x < w) px = composite_pixel(pred, y, x);
        if (x >= w + gap) px = composite_pixel(gt, y, x - w - gap);
        for (auto ch : px) ppm.push_back(static_cast<char>(ch));
      }
    }
    written.push_back(out_dir / (std::string(stem) + "_composite.ppm"));
    write_file(written.back(), ppm);
  }
  return written;
}

}  // namespace rgcseg
