#include "rgcseg/rgc.hpp"

#include "rgcseg/random.hpp"

namespace rgcseg {

void validate_rgc_geometry(std::size_t height, std::size_t width, int stride) {
  if (stride < 1) {
    throw ConfigError("rgc stride d must be >= 1, got " + std::to_string(stride));
  }
  const auto d = static_cast<std::size_t>(stride);
  if (height == 0 || width == 0 || height % d != 0 || width % d != 0) {
    throw ConfigError("rgc stride d=" + std::to_string(stride) + " does not divide feature size " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
}

GraphParams<float> init_graph_params(std::uint64_t seed, std::size_t channels, std::size_t height,
                                     std::size_t width, int stride, std::size_t layers) {
  validate_rgc_geometry(height, width, stride);
  if (channels == 0) throw ConfigError("rgc channel count must be positive");
  if (layers == 0) throw ConfigError("rgc layer count must be positive");
  GraphParams<float> p;
  p.stride = stride;
  p.channels = channels;
  p.height = height;
  p.width = width;
  const std::size_t dn = p.nodes();
  const auto d = static_cast<std::size_t>(stride);
  Rng rng(seed);
  for (std::size_t l = 0; l < layers; ++l) {
    p.adjacency.push_back(normal_tensor({dn, dn}, 0.01, rng));
    p.channel_mix.push_back(normal_tensor({channels, channels}, 0.01, rng));
  }
  p.phi_weight = kaiming_uniform({channels, channels, d, d}, 1.0, rng);
  p.phi_bias = TensorF({channels});
  p.sigma_weight = kaiming_uniform({channels, channels, d, d}, 1.0, rng);
  p.sigma_bias = TensorF({channels});
  return p;
}

std::string adjacency_name(std::size_t layer, std::size_t layers) {
  return layers > 1 ? "rgc.A_G." + std::to_string(layer) : std::string("rgc.A_G");
}

std::string channel_mix_name(std::size_t layer, std::size_t layers) {
  return layers > 1 ? "rgc.W_G." + std::to_string(layer) : std::string("rgc.W_G");
}

void insert_graph_params(const GraphParams<float>& p, ParamMap<float>& out) {
  for (std::size_t l = 0; l < p.layers(); ++l) {
    out[adjacency_name(l, p.layers())] = p.adjacency[l];
    out[channel_mix_name(l, p.layers())] = p.channel_mix[l];
  }
  out["rgc.phi.w"] = p.phi_weight;
  out["rgc.phi.b"] = p.phi_bias;
  out["rgc.sigma.w"] = p.sigma_weight;
  out["rgc.sigma.b"] = p.sigma_bias;
}

template <typename T>
GraphParams<T> extract_graph_params(const ParamMap<T>& params, std::size_t layers, int stride,
                                    std::size_t height, std::size_t width) {
  auto get = [&](const std::string& name) -> const Tensor<T>& {
    auto it = params.find(name);
    if (it == params.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
  };
  GraphParams<T> p;
  p.stride = stride;
  p.height = height;
  p.width = width;
  for (std::size_t l = 0; l < layers; ++l) {
    p.adjacency.push_back(get(adjacency_name(l, layers)));
    p.channel_mix.push_back(get(channel_mix_name(l, layers)));
  }
  p.phi_weight = get("rgc.phi.w");
  p.phi_bias = get("rgc.phi.b");
  p.sigma_weight = get("rgc.sigma.w");
  p.sigma_bias = get("rgc.sigma.b");
  p.channels = p.phi_weight.dim(0);
  return p;
}

template <typename T>
RgcVars bind_graph_params(ad::Tape<T>& tape, const GraphParams<T>& p, bool requires_grad) {
  RgcVars v;
  v.stride = p.stride;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    v.adjacency.push_back(tape.leaf(p.adjacency[l], requires_grad));
    v.channel_mix.push_back(tape.leaf(p.channel_mix[l], requires_grad));
  }
  v.phi_weight = tape.leaf(p.phi_weight, requires_grad);
  v.phi_bias = tape.leaf(p.phi_bias, requires_grad);
  v.sigma_weight = tape.leaf(p.sigma_weight, requires_grad);
  v.sigma_bias = tape.leaf(p.sigma_bias, requires_grad);
  return v;
}

namespace ad_rgc {

template <typename T>
ad::Var graph_space_projection(ad::Tape<T>& t, ad::Var x, const RgcVars& p) {
  const auto& s = t.value(x).shape();
  if (s.size() != 4) throw ShapeError("graph_space_projection: input must be 4-D, got " + shape_str(s));
  validate_rgc_geometry(s[2], s[3], p.stride);
  return ad::conv2d(t, x, p.phi_weight, p.phi_bias, {p.stride, 0});
}

template <typename T>
ad::Var rgc_layer(ad::Tape<T>& t, ad::Var node_features, ad::Var channel_mix, ad::Var adjacency) {
  return ad::matmul(t, ad::matmul(t, channel_mix, node_features), adjacency);
}

template <typename T>
ad::Var graph_reasoning(ad::Tape<T>& t, ad::Var projected, const RgcVars& p) {
  const Shape s = t.value(projected).shape();
  const std::size_t n = s[0], c = s[1], dn = s[2] * s[3];
  std::vector<ad::Var> per_sample;
  per_sample.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ad::Var sample = n == 1 ? projected : ad::select_batch(t, projected, i);
    ad::Var nodes = ad::reshape(t, sample, {c, dn});
    for (std::size_t l = 0; l < p.adjacency.size(); ++l) {
      nodes = rgc_layer(t, nodes, p.channel_mix[l], p.adjacency[l]);
    }
    per_sample.push_back(ad::reshape(t, nodes, {1, c, s[2], s[3]}));
  }
  return n == 1 ? per_sample.front() : ad::stack_batch(t, per_sample);
}

template <typename T>
ad::Var downsample_residual(ad::Tape<T>& t, ad::Var graph_features, ad::Var x, const RgcVars& p) {
  return ad::add(t, graph_features, ad::conv2d(t, x, p.sigma_weight, p.sigma_bias, {p.stride, 0}));
}

template <typename T>
ad::Var coordinate_reprojection(ad::Tape<T>& t, ad::Var combined, int stride) {
  return ad::bilinear_upsample(t, combined, stride);
}

template <typename T>
ad::Var rgc_forward(ad::Tape<T>& t, ad::Var x, const RgcVars& p) {
  ad::Var projected = graph_space_projection(t, x, p);
  ad::Var graph = graph_reasoning(t, projected, p);
  ad::Var combined = downsample_residual(t, graph, x, p);
  ad::Var reprojected = coordinate_reprojection(t, combined, p.stride);
  return ad::concat_channels(t, x, reprojected);
}

}  // namespace ad_rgc

template <typename T>
Tensor<T> graph_space_projection(const Tensor<T>& x, const GraphParams<T>& p) {
  validate_rgc_geometry(x.dim(2), x.dim(3), p.stride);
  return ops::conv2d(x, p.phi_weight, p.phi_bias, {p.stride, 0});
}

template <typename T>
Tensor<T> rgc_layer(const Tensor<T>& node_features, const Tensor<T>& channel_mix,
                    const Tensor<T>& adjacency) {
  return ops::matmul(ops::matmul(channel_mix, node_features), adjacency);
}

template <typename T>
Tensor<T> downsample_residual(const Tensor<T>& graph_features, const Tensor<T>& x,
                              const GraphParams<T>& p) {
  return ops::add(graph_features, ops::conv2d(x, p.sigma_weight, p.sigma_bias, {p.stride, 0}));
}

template <typename T>
Tensor<T> coordinate_reprojection(const Tensor<T>& combined, int stride) {
  return ops::bilinear_upsample(combined, stride);
}

template <typename T>
Tensor<T> rgc_forward(const Tensor<T>& x, const GraphParams<T>& p) {
  ad::Tape<T> tape;
  const RgcVars vars = bind_graph_params(tape, p, false);
  return tape.value(ad_rgc::rgc_forward(tape, tape.constant(x), vars));
}

#define RGCSEG_INSTANTIATE_RGC(T)                                                                 \
  template GraphParams<T> extract_graph_params(const ParamMap<T>&, std::size_t, int,              \
                                               std::size_t, std::size_t);                         \
  template RgcVars bind_graph_params(ad::Tape<T>&, const GraphParams<T>&, bool);                  \
  template ad::Var ad_rgc::graph_space_projection(ad::Tape<T>&, ad::Var, const RgcVars&);         \
  template ad::Var ad_rgc::rgc_layer(ad::Tape<T>&, ad::Var, ad::Var, ad::Var);                    \
  template ad::Var ad_rgc::graph_reasoning(ad::Tape<T>&, ad::Var, const RgcVars&);                \
  template ad::Var ad_rgc::downsample_residual(ad::Tape<T>&, ad::Var, ad::Var, const RgcVars&);   \
  template ad::Var ad_rgc::coordinate_reprojection(ad::Tape<T>&, ad::Var, int);                   \
  template ad::Var ad_rgc::rgc_forward(ad::Tape<T>&, ad::Var, const RgcVars&);                    \
  template Tensor<T> graph_space_projection(const Tensor<T>&, const GraphParams<T>&);             \
  template Tensor<T> rgc_layer(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> downsample_residual(const Tensor<T>&, const Tensor<T>&,                      \
                                         const GraphParams<T>&);                                  \
  template Tensor<T> coordinate_reprojection(const Tensor<T>&, int);                              \
  template Tensor<T> rgc_forward(const Tensor<T>&, const GraphParams<T>&);

RGCSEG_INSTANTIATE_RGC(float)
RGCSEG_INSTANTIATE_RGC(double)

}  // namespace rgcseg
