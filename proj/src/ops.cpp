#include "rgcseg/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>

namespace rgcseg::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

void require_ndim(const Shape& s, std::size_t n, const char* op, const char* what) {
  if (s.size() != n) {
    throw ShapeError(std::string(op) + ": " + what + " must be " + std::to_string(n) +
                     "-D, got " + shape_str(s));
  }
}

struct ConvDims {
  std::size_t n, cin, h, w, cout, kh, kw, ho, wo;
  int stride, pad;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
};

ConvDims conv_dims(const Shape& in, const Shape& wt, ConvGeometry g) {
  require_ndim(in, 4, "conv2d", "input");
  require_ndim(wt, 4, "conv2d", "weight");
  if (in[1] != wt[1]) {
    throw ShapeError("conv2d: input channels of " + shape_str(in) +
                     " do not match weight " + shape_str(wt));
  }
  if (g.stride < 1 || g.padding < 0) {
    throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
  }
  const std::size_t hp = in[2] + 2 * static_cast<std::size_t>(g.padding);
  const std::size_t wp = in[3] + 2 * static_cast<std::size_t>(g.padding);
  if (hp < wt[2] || wp < wt[3]) {
    throw ShapeError("conv2d: kernel " + shape_str(wt) + " larger than padded input " +
                     shape_str(in));
  }
  ConvDims d{};
  d.n = in[0];
  d.cin = in[1];
  d.h = in[2];
  d.w = in[3];
  d.cout = wt[0];
  d.kh = wt[2];
  d.kw = wt[3];
  d.stride = g.stride;
  d.pad = g.padding;
  d.ho = (hp - d.kh) / static_cast<std::size_t>(g.stride) + 1;
  d.wo = (wp - d.kw) / static_cast<std::size_t>(g.stride) + 1;
  return d;
}

// Output columns [lo, hi) of kernel column kx read inside the input row.
struct ValidRange {
  std::size_t lo, hi;
};

ValidRange valid_columns(const ConvDims& d, std::size_t kx) {
  const long s = d.stride;
  const long off = static_cast<long>(kx) - d.pad;  // ix = ox*s + off
  long lo = off >= 0 ? 0 : (-off + s - 1) / s;
  long hi = (static_cast<long>(d.w) - off + s - 1) / s;
  hi = std::clamp(hi, 0L, static_cast<long>(d.wo));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Output rows [oy0, oy1) of the patch matrix; col has shape
// [cin*kh*kw, (oy1-oy0)*wo].
template <typename T>
void im2col(const T* img, const ConvDims& d, std::size_t oy0, std::size_t oy1, T* col) {
  const long s = d.stride, p = d.pad;
  const std::size_t cols = (oy1 - oy0) * d.wo;
  for (std::size_t c = 0; c < d.cin; ++c) {
    const T* plane = img + c * d.h * d.w;
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        T* row = col + ((c * d.kh + ky) * d.kw + kx) * cols;
        const auto [lo, hi] = valid_columns(d, kx);
        const long off = static_cast<long>(kx) - p;
        for (std::size_t oy = oy0; oy < oy1; ++oy) {
          const long iy = static_cast<long>(oy) * s - p + static_cast<long>(ky);
          T* dst = row + (oy - oy0) * d.wo;
          if (iy < 0 || iy >= static_cast<long>(d.h)) {
            std::fill(dst, dst + d.wo, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * d.w;
          std::fill(dst, dst + lo, T{0});
          if (s == 1) {
            std::copy(src + static_cast<long>(lo) + off, src + static_cast<long>(hi) + off,
                      dst + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) {
              dst[ox] = src[static_cast<long>(ox) * s + off];
            }
          }
          std::fill(dst + hi, dst + d.wo, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvDims& d, std::size_t oy0, std::size_t oy1, T* img) {
  const long s = d.stride, p = d.pad;
  const std::size_t cols = (oy1 - oy0) * d.wo;
  for (std::size_t c = 0; c < d.cin; ++c) {
    T* plane = img + c * d.h * d.w;
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        const T* row = col + ((c * d.kh + ky) * d.kw + kx) * cols;
        const auto [lo, hi] = valid_columns(d, kx);
        const long off = static_cast<long>(kx) - p;
        for (std::size_t oy = oy0; oy < oy1; ++oy) {
          const long iy = static_cast<long>(oy) * s - p + static_cast<long>(ky);
          if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * d.w;
          const T* src = row + (oy - oy0) * d.wo;
          if (s == 1) {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[static_cast<long>(ox) + off] += src[ox];
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[static_cast<long>(ox) * s + off] += src[ox];
          }
        }
      }
    }
  }
}

// Output rows per im2col block: keeps the patch matrix around 512 KiB.
std::size_t block_rows(const ConvDims& d) {
  const std::size_t per_row = d.patch() * d.wo;
  return std::clamp<std::size_t>((std::size_t{1} << 17) / std::max<std::size_t>(per_row, 1), 1, d.ho);
}

// Per-thread im2col scratch; avoids faulting in a fresh buffer on every call.
template <typename T>
T* scratch(std::size_t n) {
  thread_local std::vector<T> buf;
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

struct AxisTap {
  std::size_t i0, i1;
  double frac;
};

std::vector<AxisTap> upsample_taps(std::size_t in, std::size_t out, int scale) {
  std::vector<AxisTap> taps(out);
  const double hi = static_cast<double>(in - 1);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) / scale - 0.5;
    src = std::clamp(src, 0.0, hi);
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    taps[o] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 ConvGeometry geom) {
  const ConvDims d = conv_dims(input.shape(), weight.shape(), geom);
  if (!bias.empty() && bias.shape() != Shape{d.cout}) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  Tensor<T> out({d.n, d.cout, d.ho, d.wo});
  const std::size_t rows = block_rows(d);
  T* col = scratch<T>(d.patch() * rows * d.wo);
  ConstMapMat<T> wmat(weight.data().data(), d.cout, d.patch());
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* img = input.data().data() + n * d.cin * d.h * d.w;
    T* o = out.data().data() + n * d.cout * d.pixels();
    for (std::size_t oy0 = 0; oy0 < d.ho; oy0 += rows) {
      const std::size_t oy1 = std::min(d.ho, oy0 + rows);
      const auto cols = static_cast<Eigen::Index>((oy1 - oy0) * d.wo);
      im2col(img, d, oy0, oy1, col);
      ConstMapMat<T> cmat(col, d.patch(), cols);
      StridedMap<T> omat(o + oy0 * d.wo, d.cout, cols, Eigen::OuterStride<>(d.pixels()));
      omat.noalias() = wmat * cmat;
    }
    if (!bias.empty()) {
      MapMat<T> full(o, d.cout, d.pixels());
      for (std::size_t c = 0; c < d.cout; ++c) full.row(c).array() += bias[c];
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                             const Tensor<T>& grad_out, ConvGeometry geom, bool need_input) {
  const ConvDims d = conv_dims(input.shape(), weight.shape(), geom);
  if (grad_out.shape() != Shape{d.n, d.cout, d.ho, d.wo}) {
    throw ShapeError("conv2d_backward: grad " + shape_str(grad_out.shape()) +
                     " does not match output geometry");
  }
  ConvGrads<T> g{need_input ? Tensor<T>(input.shape()) : Tensor<T>(), Tensor<T>(weight.shape()),
                 Tensor<T>({d.cout})};
  const std::size_t rows = block_rows(d);
  T* col = scratch<T>(d.patch() * rows * d.wo);
  ConstMapMat<T> wmat(weight.data().data(), d.cout, d.patch());
  MapMat<T> gw(g.weight.data().data(), d.cout, d.patch());
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* img = input.data().data() + n * d.cin * d.h * d.w;
    const T* gyp = grad_out.data().data() + n * d.cout * d.pixels();
    // Plain loop: Eigen's vectorised sum peels by address, so its rounding
    // would depend on where the buffer happens to sit.
    for (std::size_t c = 0; c < d.cout; ++c) {
      T acc{0};
      for (const T* q = gyp + c * d.pixels(), *e = q + d.pixels(); q != e; ++q) acc += *q;
      g.bias[c] += acc;
    }
    for (std::size_t oy0 = 0; oy0 < d.ho; oy0 += rows) {
      const std::size_t oy1 = std::min(d.ho, oy0 + rows);
      const auto cols = static_cast<Eigen::Index>((oy1 - oy0) * d.wo);
      ConstStridedMap<T> gy(gyp + oy0 * d.wo, d.cout, cols, Eigen::OuterStride<>(d.pixels()));
      im2col(img, d, oy0, oy1, col);
      MapMat<T> cmat(col, d.patch(), cols);
      gw.noalias() += gy * cmat.transpose();
      if (need_input) {
        cmat.noalias() = wmat.transpose() * gy;
        col2im_add(col, d, oy0, oy1, g.input.data().data() + n * d.cin * d.h * d.w);
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_ndim(a.shape(), 2, "matmul", "lhs");
  require_ndim(b.shape(), 2, "matmul", "rhs");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  Tensor<T> c({a.dim(0), b.dim(1)});
  MapMat<T>(c.data().data(), a.dim(0), b.dim(1)).noalias() =
      ConstMapMat<T>(a.data().data(), a.dim(0), a.dim(1)) *
      ConstMapMat<T>(b.data().data(), b.dim(0), b.dim(1));
  return c;
}

template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  require_ndim(a.shape(), 2, "matmul_tn", "lhs");
  require_ndim(b.shape(), 2, "matmul_tn", "rhs");
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("matmul_tn: inner extents differ, " + shape_str(a.shape()) + "^T x " +
                     shape_str(b.shape()));
  }
  Tensor<T> c({a.dim(1), b.dim(1)});
  MapMat<T>(c.data().data(), a.dim(1), b.dim(1)).noalias() =
      ConstMapMat<T>(a.data().data(), a.dim(0), a.dim(1)).transpose() *
      ConstMapMat<T>(b.data().data(), b.dim(0), b.dim(1));
  return c;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_ndim(a.shape(), 2, "matmul_nt", "lhs");
  require_ndim(b.shape(), 2, "matmul_nt", "rhs");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: inner extents differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  }
  Tensor<T> c({a.dim(0), b.dim(0)});
  MapMat<T>(c.data().data(), a.dim(0), b.dim(0)).noalias() =
      ConstMapMat<T>(a.data().data(), a.dim(0), a.dim(1)) *
      ConstMapMat<T>(b.data().data(), b.dim(0), b.dim(1)).transpose();
  return c;
}

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& input, int scale) {
  require_ndim(input.shape(), 4, "bilinear_upsample", "input");
  if (scale < 1) throw ShapeError("bilinear_upsample: scale must be >= 1");
  if (scale == 1) return input;
  const auto [n, c, h, w] = std::array{input.dim(0), input.dim(1), input.dim(2), input.dim(3)};
  const std::size_t ho = h * static_cast<std::size_t>(scale);
  const std::size_t wo = w * static_cast<std::size_t>(scale);
  const auto ty = upsample_taps(h, ho, scale);
  const auto tx = upsample_taps(w, wo, scale);
  Tensor<T> out({n, c, ho, wo});
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* src = input.data().data() + p * h * w;
    T* dst = out.data().data() + p * ho * wo;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      const T* r0 = src + ty[oy].i0 * w;
      const T* r1 = src + ty[oy].i1 * w;
      const T fy = static_cast<T>(ty[oy].frac);
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const T fx = static_cast<T>(tx[ox].frac);
        const T top = r0[tx[ox].i0] + fx * (r0[tx[ox].i1] - r0[tx[ox].i0]);
        const T bot = r1[tx[ox].i0] + fx * (r1[tx[ox].i1] - r1[tx[ox].i0]);
        dst[oy * wo + ox] = top + fy * (bot - top);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> bilinear_upsample_backward(const Tensor<T>& grad_out, const Shape& input_shape,
                                     int scale) {
  require_ndim(input_shape, 4, "bilinear_upsample_backward", "input");
  const auto [n, c, h, w] =
      std::array{input_shape[0], input_shape[1], input_shape[2], input_shape[3]};
  const std::size_t ho = h * static_cast<std::size_t>(scale);
  const std::size_t wo = w * static_cast<std::size_t>(scale);
  if (grad_out.shape() != Shape{n, c, ho, wo}) {
    throw ShapeError("bilinear_upsample_backward: grad " + shape_str(grad_out.shape()) +
                     " does not match input " + shape_str(input_shape));
  }
  if (scale == 1) return grad_out;
  const auto ty = upsample_taps(h, ho, scale);
  const auto tx = upsample_taps(w, wo, scale);
  Tensor<T> gin(input_shape);
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* g = grad_out.data().data() + p * ho * wo;
    T* dst = gin.data().data() + p * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      T* r0 = dst + ty[oy].i0 * w;
      T* r1 = dst + ty[oy].i1 * w;
      const T fy = static_cast<T>(ty[oy].frac);
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const T fx = static_cast<T>(tx[ox].frac);
        const T v = g[oy * wo + ox];
        const T top = v * (T{1} - fy);
        const T bot = v * fy;
        r0[tx[ox].i0] += top * (T{1} - fx);
        r0[tx[ox].i1] += top * fx;
        r1[tx[ox].i0] += bot * (T{1} - fx);
        r1[tx[ox].i1] += bot * fx;
      }
    }
  }
  return gin;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_ndim(a.shape(), 4, "concat_channels", "lhs");
  require_ndim(b.shape(), 4, "concat_channels", "rhs");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ outside the channel axis");
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  Tensor<T> out({n, ca + cb, a.dim(2), a.dim(3)});
  T* dst = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    dst = std::copy_n(a.data().data() + i * ca * plane, ca * plane, dst);
    dst = std::copy_n(b.data().data() + i * cb * plane, cb * plane, dst);
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_ndim(x.shape(), 4, "slice_channels", "input");
  if (begin + count > x.dim(1)) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<T> out({n, count, x.dim(2), x.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.data().data() + (i * c + begin) * plane, count * plane,
                out.data().data() + i * count * plane);
  }
  return out;
}

template <typename T>
Tensor<T> select_batch(const Tensor<T>& x, std::size_t n) {
  if (x.ndim() == 0 || n >= x.dim(0)) {
    throw ShapeError("select_batch: index " + std::to_string(n) + " outside " +
                     shape_str(x.shape()));
  }
  Shape s = x.shape();
  s[0] = 1;
  const std::size_t stride = x.numel() / x.dim(0);
  std::vector<T> data(x.data().begin() + static_cast<long>(n * stride),
                      x.data().begin() + static_cast<long>((n + 1) * stride));
  return Tensor<T>(std::move(s), std::move(data));
}

template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("stack_batch: no parts");
  Shape s = parts.front().shape();
  std::vector<T> data;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape ps = p.shape();
    if (ps.empty() || ps.size() != s.size() ||
        !std::equal(ps.begin() + 1, ps.end(), s.begin() + 1)) {
      throw ShapeError("stack_batch: " + shape_str(ps) + " incompatible with " + shape_str(s));
    }
    total += ps[0];
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  s[0] = total;
  return Tensor<T>(std::move(s), std::move(data));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  return x.reshaped(shape);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out = a;
  accumulate(out, b);
  return out;
}

template <typename T>
Tensor<T> scale_by(const Tensor<T>& x, T alpha) {
  Tensor<T> out = x;
  for (auto& v : out.data()) v *= alpha;
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.numel(); ++i) {
    if (!(x[i] > T{0})) g[i] = T{0};
  }
  return g;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.data()) v = sigmoid(v);
  return out;
}

template <typename T>
T sum(const Tensor<T>& x) {
  T s{0};
  for (T v : x.data()) s += v;
  return s;
}

template <typename T>
void accumulate(Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("accumulate: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  auto dst = a.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
T bce_with_logits(const Tensor<T>& logits, const Tensor<T>& masks) {
  if (logits.shape() != masks.shape()) {
    throw ShapeError("bce_loss: logits " + shape_str(logits.shape()) + " vs masks " +
                     shape_str(masks.shape()));
  }
  if (logits.numel() == 0) throw ShapeError("bce_loss: empty input");
  // Accumulate in double so the f32 loss does not drift with map size.
  double total = 0.0;
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    const double z = logits[i];
    const double m = masks[i];
    total += std::max(z, 0.0) - z * m + std::log1p(std::exp(-std::abs(z)));
  }
  return static_cast<T>(total / static_cast<double>(logits.numel()));
}

template <typename T>
Tensor<T> bce_with_logits_backward(const Tensor<T>& logits, const Tensor<T>& masks, T grad_out) {
  Tensor<T> g(logits.shape());
  const T scale = grad_out / static_cast<T>(logits.numel());
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = (sigmoid(logits[i]) - masks[i]) * scale;
  return g;
}

#define RGCSEG_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                            ConvGeometry);                                                     \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                        ConvGeometry, bool);                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> matmul_tn(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> bilinear_upsample(const Tensor<T>&, int);                                \
  template Tensor<T> bilinear_upsample_backward(const Tensor<T>&, const Shape&, int);         \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> select_batch(const Tensor<T>&, std::size_t);                             \
  template Tensor<T> stack_batch(const std::vector<Tensor<T>>&);                              \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scale_by(const Tensor<T>&, T);                                           \
  template Tensor<T> relu(const Tensor<T>&);                                                  \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> sigmoid(const Tensor<T>&);                                               \
  template T sigmoid(T);                                                                       \
  template T sum(const Tensor<T>&);                                                            \
  template void accumulate(Tensor<T>&, const Tensor<T>&);                                      \
  template T bce_with_logits(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> bce_with_logits_backward(const Tensor<T>&, const Tensor<T>&, T);

RGCSEG_INSTANTIATE_OPS(float)
RGCSEG_INSTANTIATE_OPS(double)

}  // namespace rgcseg::ops
