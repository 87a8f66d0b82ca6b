#include "rgcseg/checkpoint.hpp"

#include <sstream>

#include "rgcseg/rgc.hpp"

namespace rgcseg {

Container checkpoint_container(const TrainState& state, const KeyValues& extra) {
  Container c;
  for (const auto& [name, t] : state.params) c.tensors.push_back({name, t});
  for (const auto& [name, t] : state.momentum) c.tensors.push_back({kMomentumPrefix + name, t});
  KeyValues meta = extra;
  state.config.echo(meta);
  meta["step"] = std::to_string(state.step);
  meta["train.lr"] = format_double(state.lr);
  meta["train.momentum"] = format_double(state.momentum_coef);
  meta["train.weight_decay"] = format_double(state.weight_decay);
  meta["seed"] = std::to_string(state.seed);
  c.metadata = format_key_values(meta);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const KeyValues& extra) {
  save_container(path, checkpoint_container(state, extra));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = load_container(path);
  if (!c.metadata) throw ContainerError(path.string() + ": checkpoint has no metadata record");
  LoadedCheckpoint out;
  std::istringstream is(*c.metadata);
  out.meta = parse_key_values(is, path.string() + "#META");
  TrainState& s = out.state;
  s.config.apply(out.meta);
  s.config.validate();
  s.step = kv_uint(out.meta, "step", 0);
  s.lr = kv_double(out.meta, "train.lr", s.lr);
  s.momentum_coef = kv_double(out.meta, "train.momentum", s.momentum_coef);
  s.weight_decay = kv_double(out.meta, "train.weight_decay", s.weight_decay);
  s.seed = kv_uint(out.meta, "seed", 0);

  const std::string prefix = kMomentumPrefix;
  for (const auto& nt : c.tensors) {
    const TensorF* t = std::get_if<TensorF>(&nt.tensor);
    if (t == nullptr) throw ContainerError(path.string() + ": tensor '" + nt.name + "' is not f32");
    if (nt.name.rfind(prefix, 0) == 0) {
      s.momentum[nt.name.substr(prefix.size())] = *t;
    } else {
      s.params[nt.name] = *t;
    }
  }
  // The stored tensors must be exactly those a fresh model of this config has.
  const TrainState reference = build_model(s.config, 0);
  for (const auto& [name, t] : reference.params) {
    auto it = s.params.find(name);
    if (it == s.params.end()) {
      throw ConfigError(path.string() + ": missing parameter '" + name + "'");
    }
    if (it->second.shape() != t.shape()) {
      throw ConfigError(path.string() + ": parameter '" + name + "' expected shape " +
                        shape_str(t.shape()) + ", found " + shape_str(it->second.shape()));
    }
    auto mt = s.momentum.find(name);
    if (mt == s.momentum.end() || mt->second.shape() != t.shape()) {
      throw ConfigError(path.string() + ": momentum buffer for '" + name +
                        "' missing or misshapen");
    }
  }
  if (s.params.size() != reference.params.size() ||
      s.momentum.size() != reference.params.size()) {
    throw ConfigError(path.string() + ": unexpected extra tensors in checkpoint");
  }
  return out;
}

}  // namespace rgcseg
