#pragma once

// Residual graph convolution block.
//
//   V_D = phi(X)                   stride-d, d x d non-overlapping projection
//   V_N = reshape(V_D)             [C, D_N], D_N = (H/d)(W/d)
//   V_G = W_G * V_N * A_G          channel graph on the left, node graph on the right
//   Y   = reshape(V_G) + sigma(X)  downsample residual keeps coordinate features
//   X_G = bilinear_upsample(Y, d)
//   out = concat(X, X_G)           [N, 2C, H, W]
//
// With L > 1 layers the graph product is applied L times to V_N, each with
// its own (W_G, A_G).

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgcseg/autodiff.hpp"
#include "rgcseg/tensor.hpp"

namespace rgcseg {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
struct GraphParams {
  int stride = 8;  // d
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Tensor<T>> adjacency;    // A_G per layer, [D_N, D_N]
  std::vector<Tensor<T>> channel_mix;  // W_G per layer, [C, C]
  Tensor<T> phi_weight, phi_bias;      // [C, C, d, d], [C]
  Tensor<T> sigma_weight, sigma_bias;  // [C, C, d, d], [C]

  std::size_t nodes() const {
    return (height / static_cast<std::size_t>(stride)) * (width / static_cast<std::size_t>(stride));
  }
  std::size_t layers() const { return adjacency.size(); }

  template <typename U>
  GraphParams<U> cast() const;
};

// Throws ConfigError unless d >= 1 and d divides both H and W.
void validate_rgc_geometry(std::size_t height, std::size_t width, int stride);

// A_G, W_G ~ N(0, 0.01^2); phi and sigma Kaiming-uniform (gain 1); biases zero.
GraphParams<float> init_graph_params(std::uint64_t seed, std::size_t channels, std::size_t height,
                                     std::size_t width, int stride, std::size_t layers = 1);

// Serialised as rgc.A_G, rgc.W_G, rgc.phi.w, rgc.phi.b, rgc.sigma.w, rgc.sigma.b.
// With more than one layer the graph matrices become rgc.A_G.<k> / rgc.W_G.<k>.
std::string adjacency_name(std::size_t layer, std::size_t layers);
std::string channel_mix_name(std::size_t layer, std::size_t layers);
void insert_graph_params(const GraphParams<float>& p, ParamMap<float>& out);
template <typename T>
GraphParams<T> extract_graph_params(const ParamMap<T>& params, std::size_t layers, int stride,
                                    std::size_t height, std::size_t width);

// Tape handles for one block's parameters.
struct RgcVars {
  int stride = 8;
  std::vector<ad::Var> adjacency;
  std::vector<ad::Var> channel_mix;
  ad::Var phi_weight, phi_bias, sigma_weight, sigma_bias;
};

template <typename T>
RgcVars bind_graph_params(ad::Tape<T>& tape, const GraphParams<T>& p, bool requires_grad);

namespace ad_rgc {

template <typename T>
ad::Var graph_space_projection(ad::Tape<T>& t, ad::Var x, const RgcVars& p);
// V_N [C, D_N] -> V_G [C, D_N] for one layer.
template <typename T>
ad::Var rgc_layer(ad::Tape<T>& t, ad::Var node_features, ad::Var channel_mix, ad::Var adjacency);
// Applies every graph layer to each sample of a batched V_D [N,C,h,w].
template <typename T>
ad::Var graph_reasoning(ad::Tape<T>& t, ad::Var projected, const RgcVars& p);
template <typename T>
ad::Var downsample_residual(ad::Tape<T>& t, ad::Var graph_features, ad::Var x, const RgcVars& p);
template <typename T>
ad::Var coordinate_reprojection(ad::Tape<T>& t, ad::Var combined, int stride);
template <typename T>
ad::Var rgc_forward(ad::Tape<T>& t, ad::Var x, const RgcVars& p);

}  // namespace ad_rgc

// Value-only entry points (no gradient bookkeeping kept by the caller).
template <typename T>
Tensor<T> graph_space_projection(const Tensor<T>& x, const GraphParams<T>& p);
template <typename T>
Tensor<T> rgc_layer(const Tensor<T>& node_features, const Tensor<T>& channel_mix,
                    const Tensor<T>& adjacency);
template <typename T>
Tensor<T> downsample_residual(const Tensor<T>& graph_features, const Tensor<T>& x,
                              const GraphParams<T>& p);
template <typename T>
Tensor<T> coordinate_reprojection(const Tensor<T>& combined, int stride);
template <typename T>
Tensor<T> rgc_forward(const Tensor<T>& x, const GraphParams<T>& p);

template <typename T>
template <typename U>
GraphParams<U> GraphParams<T>::cast() const {
  GraphParams<U> out;
  out.stride = stride;
  out.channels = channels;
  out.height = height;
  out.width = width;
  for (const auto& a : adjacency) out.adjacency.push_back(a.template cast<U>());
  for (const auto& w : channel_mix) out.channel_mix.push_back(w.template cast<U>());
  out.phi_weight = phi_weight.template cast<U>();
  out.phi_bias = phi_bias.template cast<U>();
  out.sigma_weight = sigma_weight.template cast<U>();
  out.sigma_bias = sigma_bias.template cast<U>();
  return out;
}

}  // namespace rgcseg
