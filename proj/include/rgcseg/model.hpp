#pragma once

// Segmentation network: encoder -> (optional RGC block) -> head.
//
//   encoder: 1x1 lift Cin -> C, then `encoder_blocks` residual blocks
//            x + conv3x3(relu(conv3x3(x)))
//   rgc:     concat(x, reprojected graph features), C -> 2C
//   head:    eight 3x3 convs (padding 1, relu after each) at constant width,
//            then a 1x1 conv to K logits
//
// Parameter names: enc.lift.{w,b}, enc.<i>.conv{1,2}.{w,b}, rgc.*, head.<0..8>.{w,b}.

#include <cstdint>
#include <map>
#include <string>

#include "rgcseg/autodiff.hpp"
#include "rgcseg/config.hpp"
#include "rgcseg/tensor.hpp"

namespace rgcseg {

inline constexpr std::size_t kHeadHiddenLayers = 8;
inline constexpr float kLogitBiasInit = -2.0f;

struct ModelConfig {
  std::size_t in_channels = 4;
  std::size_t channels = 16;  // C
  std::size_t height = 64;
  std::size_t width = 64;
  int stride = 8;  // RGC projection stride d
  std::size_t rgc_layers = 1;
  std::size_t num_classes = 6;
  bool use_rgc = true;
  std::size_t encoder_blocks = 1;

  std::size_t head_channels() const { return use_rgc ? 2 * channels : channels; }
  void validate() const;  // throws ConfigError

  // model.* keys
  void apply(const KeyValues& kv);
  void echo(KeyValues& kv) const;
};

struct TrainState {
  ModelConfig config;
  ParamMap<float> params;
  ParamMap<float> momentum;  // same keys and shapes as params
  std::uint64_t step = 0;
  double lr = 0.05;
  double momentum_coef = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

// Deterministic under (cfg, seed). Conv weights feeding a relu use
// Kaiming-uniform with gain sqrt(2); the logit layer uses gain 1. Biases are
// zero except the logit bias, which starts at kLogitBiasInit.
TrainState build_model(const ModelConfig& cfg, std::uint64_t seed);

using VarMap = std::map<std::string, ad::Var>;

template <typename T>
VarMap bind_params(ad::Tape<T>& tape, const ParamMap<T>& params, bool requires_grad);

template <typename T>
ad::Var encoder_forward(ad::Tape<T>& t, ad::Var features, const ModelConfig& cfg, const VarMap& p);
template <typename T>
ad::Var head_forward(ad::Tape<T>& t, ad::Var features, const ModelConfig& cfg, const VarMap& p);
// Full network; returns logits [N, K, H, W].
template <typename T>
ad::Var model_forward(ad::Tape<T>& t, ad::Var features, const ModelConfig& cfg, const VarMap& p);

// Inference helper. features: [Cin, H, W] or [N, Cin, H, W].
TensorF predict_logits(const ModelConfig& cfg, const ParamMap<float>& params,
                       const TensorF& features);

// Momentum SGD: v <- mu v + (g + wd p); p <- p - lr v. A NaN/Inf gradient or
// an update that overflows aborts the whole step with std::runtime_error
// naming the parameter; state is left untouched.
void sgd_step(TrainState& state, const ParamMap<float>& grads);

}  // namespace rgcseg
