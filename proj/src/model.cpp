#include "rgcseg/model.hpp"

#include <cmath>

#include "rgcseg/random.hpp"
#include "rgcseg/rgc.hpp"

namespace rgcseg {
namespace {

const ad::Var& lookup(const VarMap& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ConfigError("model has no parameter '" + name + "'");
  return it->second;
}

template <typename T>
ad::Var conv(ad::Tape<T>& t, ad::Var x, const VarMap& p, const std::string& prefix, int pad) {
  return ad::conv2d(t, x, lookup(p, prefix + ".w"), lookup(p, prefix + ".b"), {1, pad});
}

}  // namespace

void ModelConfig::validate() const {
  if (in_channels == 0 || channels == 0) throw ConfigError("channel counts must be positive");
  if (num_classes == 0) throw ConfigError("num_classes must be >= 1");
  if (height == 0 || width == 0) throw ConfigError("feature size must be positive");
  if (use_rgc) {
    validate_rgc_geometry(height, width, stride);
    if (rgc_layers == 0) throw ConfigError("rgc_layers must be >= 1");
  }
}

void ModelConfig::apply(const KeyValues& kv) {
  in_channels = kv_uint(kv, "model.cin", in_channels);
  channels = kv_uint(kv, "model.C", channels);
  height = kv_uint(kv, "model.H", height);
  width = kv_uint(kv, "model.W", width);
  stride = static_cast<int>(kv_int(kv, "model.d", stride));
  rgc_layers = kv_uint(kv, "model.L", rgc_layers);
  num_classes = kv_uint(kv, "model.K", num_classes);
  use_rgc = kv_bool(kv, "model.use_rgc", use_rgc);
  encoder_blocks = kv_uint(kv, "model.encoder_blocks", encoder_blocks);
}

void ModelConfig::echo(KeyValues& kv) const {
  kv["model.cin"] = std::to_string(in_channels);
  kv["model.C"] = std::to_string(channels);
  kv["model.H"] = std::to_string(height);
  kv["model.W"] = std::to_string(width);
  kv["model.d"] = std::to_string(stride);
  kv["model.L"] = std::to_string(rgc_layers);
  kv["model.K"] = std::to_string(num_classes);
  kv["model.use_rgc"] = use_rgc ? "true" : "false";
  kv["model.encoder_blocks"] = std::to_string(encoder_blocks);
}

TrainState build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TrainState s;
  s.config = cfg;
  s.seed = seed;
  Rng rng(derive_seed(seed, "model-init"));
  const double relu_gain = std::sqrt(2.0);
  auto add_conv = [&](const std::string& prefix, std::size_t cout, std::size_t cin, std::size_t k,
                      double gain) {
    s.params[prefix + ".w"] = kaiming_uniform({cout, cin, k, k}, gain, rng);
    s.params[prefix + ".b"] = TensorF({cout});
  };
  const std::size_t c = cfg.channels;
  add_conv("enc.lift", c, cfg.in_channels, 1, 1.0);
  for (std::size_t b = 0; b < cfg.encoder_blocks; ++b) {
    add_conv("enc." + std::to_string(b) + ".conv1", c, c, 3, relu_gain);
    add_conv("enc." + std::to_string(b) + ".conv2", c, c, 3, 1.0);
  }
  if (cfg.use_rgc) {
    insert_graph_params(init_graph_params(derive_seed(seed, "rgc-init"), c, cfg.height, cfg.width,
                                          cfg.stride, cfg.rgc_layers),
                        s.params);
  }
  const std::size_t hc = cfg.head_channels();
  for (std::size_t l = 0; l < kHeadHiddenLayers; ++l) {
    add_conv("head." + std::to_string(l), hc, hc, 3, relu_gain);
  }
  add_conv("head." + std::to_string(kHeadHiddenLayers), cfg.num_classes, hc, 1, 1.0);
  // Masks are sparse; start the logits at a low prior.
  for (float& v : s.params["head." + std::to_string(kHeadHiddenLayers) + ".b"].data()) v = kLogitBiasInit;
  for (const auto& [name, t] : s.params) s.momentum[name] = TensorF(t.shape());
  return s;
}

template <typename T>
VarMap bind_params(ad::Tape<T>& tape, const ParamMap<T>& params, bool requires_grad) {
  VarMap vars;
  for (const auto& [name, t] : params) vars[name] = tape.leaf(t, requires_grad);
  return vars;
}

template <typename T>
ad::Var encoder_forward(ad::Tape<T>& t, ad::Var features, const ModelConfig& cfg, const VarMap& p) {
  ad::Var x = conv(t, features, p, "enc.lift", 0);
  for (std::size_t b = 0; b < cfg.encoder_blocks; ++b) {
    const std::string prefix = "enc." + std::to_string(b);
    ad::Var h = ad::relu(t, conv(t, x, p, prefix + ".conv1", 1));
    x = ad::add(t, x, conv(t, h, p, prefix + ".conv2", 1));
  }
  return x;
}

template <typename T>
ad::Var head_forward(ad::Tape<T>& t, ad::Var features, const ModelConfig& cfg, const VarMap& p) {
  const std::size_t cin = t.value(features).dim(1);
  if (cin != cfg.head_channels()) {
    throw ShapeError("head_forward: expected " + std::to_string(cfg.head_channels()) +
                     " input channels, got " + std::to_string(cin));
  }
  ad::Var x = features;
  for (std::size_t l = 0; l < kHeadHiddenLayers; ++l) {
    x = ad::relu(t, conv(t, x, p, "head." + std::to_string(l), 1));
  }
  return conv(t, x, p, "head." + std::to_string(kHeadHiddenLayers), 0);
}

template <typename T>
ad::Var model_forward(ad::Tape<T>& t, ad::Var features, const ModelConfig& cfg, const VarMap& p) {
  ad::Var x = encoder_forward(t, features, cfg, p);
  if (cfg.use_rgc) {
    RgcVars rv;
    rv.stride = cfg.stride;
    for (std::size_t l = 0; l < cfg.rgc_layers; ++l) {
      rv.adjacency.push_back(lookup(p, adjacency_name(l, cfg.rgc_layers)));
      rv.channel_mix.push_back(lookup(p, channel_mix_name(l, cfg.rgc_layers)));
    }
    rv.phi_weight = lookup(p, "rgc.phi.w");
    rv.phi_bias = lookup(p, "rgc.phi.b");
    rv.sigma_weight = lookup(p, "rgc.sigma.w");
    rv.sigma_bias = lookup(p, "rgc.sigma.b");
    x = ad_rgc::rgc_forward(t, x, rv);
  }
  return head_forward(t, x, cfg, p);
}

TensorF predict_logits(const ModelConfig& cfg, const ParamMap<float>& params,
                       const TensorF& features) {
  TensorF input = features.ndim() == 3
                      ? features.reshaped({1, features.dim(0), features.dim(1), features.dim(2)})
                      : features;
  ad::Tape<float> tape;
  const VarMap vars = bind_params(tape, params, false);
  const ad::Var out = model_forward(tape, tape.constant(std::move(input)), cfg, vars);
  return tape.value(out);
}

void sgd_step(TrainState& state, const ParamMap<float>& grads) {
  for (const auto& [name, p] : state.params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw std::runtime_error("sgd_step: no gradient for '" + name + "'");
    if (it->second.shape() != p.shape()) {
      throw ShapeError("sgd_step: gradient for '" + name + "' has shape " +
                       shape_str(it->second.shape()) + ", parameter " + shape_str(p.shape()));
    }
    if (!it->second.all_finite()) {
      throw std::runtime_error("sgd_step: non-finite gradient for '" + name + "'");
    }
  }
  const auto lr = static_cast<float>(state.lr);
  const auto mu = static_cast<float>(state.momentum_coef);
  const auto wd = static_cast<float>(state.weight_decay);
  // Finite gradients can still overflow the update; commit only a finite result.
  ParamMap<float> next_p, next_v;
  for (const auto& [name, p] : state.params) {
    const TensorF& g = grads.at(name);
    TensorF v = state.momentum.at(name);
    TensorF q = p;
    for (std::size_t i = 0; i < q.numel(); ++i) {
      v[i] = mu * v[i] + (g[i] + wd * q[i]);
      q[i] -= lr * v[i];
    }
    if (!q.all_finite() || !v.all_finite()) {
      throw std::runtime_error("sgd_step: update of '" + name + "' is not finite");
    }
    next_p.emplace(name, std::move(q));
    next_v.emplace(name, std::move(v));
  }
  state.params = std::move(next_p);
  state.momentum = std::move(next_v);
  ++state.step;
}

#define RGCSEG_INSTANTIATE_MODEL(T)                                                            \
  template VarMap bind_params(ad::Tape<T>&, const ParamMap<T>&, bool);                         \
  template ad::Var encoder_forward(ad::Tape<T>&, ad::Var, const ModelConfig&, const VarMap&); \
  template ad::Var head_forward(ad::Tape<T>&, ad::Var, const ModelConfig&, const VarMap&);    \
  template ad::Var model_forward(ad::Tape<T>&, ad::Var, const ModelConfig&, const VarMap&);

RGCSEG_INSTANTIATE_MODEL(float)
RGCSEG_INSTANTIATE_MODEL(double)

}  // namespace rgcseg
