#pragma once

// Forward kernels and their vector-Jacobian products. Everything here is a
// pure function of its arguments; the autodiff tape in autodiff.hpp wires
// these together.

#include "rgcseg/tensor.hpp"

namespace rgcseg::ops {

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
};

// Cross-correlation. input [N,Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout]
// (an empty bias tensor means no bias).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 ConvGeometry geom);

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

// Gradients of conv2d w.r.t. its three arguments given dL/d(output). The
// input gradient is skipped (left empty) when need_input is false.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                             const Tensor<T>& grad_out, ConvGeometry geom, bool need_input = true);

// c = a * b for 2-D tensors. Transposed variants avoid materialising the transpose.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b);  // a^T * b
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);  // a * b^T

// Half-pixel-centre bilinear upsampling with border clamping.
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& input, int scale);
template <typename T>
Tensor<T> bilinear_upsample_backward(const Tensor<T>& grad_out, const Shape& input_shape, int scale);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
// Channels [begin, begin + count) of a 4-D tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count);

// Sample n of a batched tensor (leading axis kept, extent 1) and its inverse.
template <typename T>
Tensor<T> select_batch(const Tensor<T>& x, std::size_t n);
template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& parts);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale_by(const Tensor<T>& x, T alpha);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
T sigmoid(T x);

template <typename T>
T sum(const Tensor<T>& x);

// In-place a += b.
template <typename T>
void accumulate(Tensor<T>& a, const Tensor<T>& b);

// Mean binary cross-entropy on logits in the stable form
// max(z,0) - z*m + log(1 + exp(-|z|)).
template <typename T>
T bce_with_logits(const Tensor<T>& logits, const Tensor<T>& masks);
template <typename T>
Tensor<T> bce_with_logits_backward(const Tensor<T>& logits, const Tensor<T>& masks, T grad_out);

}  // namespace rgcseg::ops
