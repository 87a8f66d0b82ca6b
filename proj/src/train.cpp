#include "rgcseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rgcseg/checkpoint.hpp"
#include "rgcseg/ops.hpp"
#include "rgcseg/random.hpp"

namespace rgcseg {
namespace {

TensorF batched(const TensorF& t) { return t.reshaped({1, t.dim(0), t.dim(1), t.dim(2)}); }

class LossLog {
 public:
  explicit LossLog(const std::optional<std::filesystem::path>& path) {
    if (!path) return;
    os_.open(*path, std::ios::binary);
    if (!os_) throw std::runtime_error(path->string() + ": cannot open loss log");
    os_ << "step,loss\n";
    os_.flush();
  }
  void write(std::uint64_t step, double loss) {
    if (!os_.is_open()) return;
    os_ << step << ',' << format_double(loss) << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

}  // namespace

void TrainOptions::apply(const KeyValues& kv) {
  steps = kv_uint(kv, "train.steps", steps);
  batch_size = kv_uint(kv, "train.batch_size", batch_size);
  lr = kv_double(kv, "train.lr", lr);
  momentum = kv_double(kv, "train.momentum", momentum);
  weight_decay = kv_double(kv, "train.weight_decay", weight_decay);
  save_every = kv_uint(kv, "train.save_every", save_every);
  use_aug = kv_bool(kv, "aug.enabled", use_aug);
  aug.enabled = use_aug;
  aug.max_rot_deg = kv_double(kv, "aug.max_rot_deg", aug.max_rot_deg);
  aug.flip_prob = kv_double(kv, "aug.flip_prob", aug.flip_prob);
  aug.scale_min = kv_double(kv, "aug.scale_min", aug.scale_min);
  aug.scale_max = kv_double(kv, "aug.scale_max", aug.scale_max);
}

void TrainOptions::echo(KeyValues& kv) const {
  kv["train.steps"] = std::to_string(steps);
  kv["train.batch_size"] = std::to_string(batch_size);
  kv["train.lr"] = format_double(lr);
  kv["train.momentum"] = format_double(momentum);
  kv["train.weight_decay"] = format_double(weight_decay);
  kv["train.save_every"] = std::to_string(save_every);
  kv["aug.enabled"] = use_aug ? "true" : "false";
  kv["aug.max_rot_deg"] = format_double(aug.max_rot_deg);
  kv["aug.flip_prob"] = format_double(aug.flip_prob);
  kv["aug.scale_min"] = format_double(aug.scale_min);
  kv["aug.scale_max"] = format_double(aug.scale_max);
}

double loss_and_grads(const ModelConfig& cfg, const ParamMap<float>& params,
                      const std::vector<const SceneSample*>& batch, ParamMap<float>* grads) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
  const bool want_grads = grads != nullptr;
  if (want_grads) {
    grads->clear();
    for (const auto& [name, p] : params) (*grads)[name] = TensorF(p.shape());
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const SceneSample* s : batch) {
    ad::Tape<float> tape;
    const VarMap vars = bind_params(tape, params, want_grads);
    const ad::Var x = tape.constant(batched(s->features));
    const ad::Var logits = model_forward(tape, x, cfg, vars);
    const ad::Var m = tape.constant(batched(s->masks));
    const ad::Var loss = ad::scale_by(tape, ad::bce_loss(tape, logits, m), static_cast<float>(inv));
    total += static_cast<double>(tape.value(loss)[0]);
    if (!want_grads) continue;
    tape.backward(loss);
    for (const auto& [name, v] : vars) ops::accumulate((*grads)[name], tape.grad(v));
  }
  return total;
}

double dataset_loss(const ModelConfig& cfg, const ParamMap<float>& params,
                    const std::vector<SceneSample>& samples) {
  std::vector<const SceneSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  return loss_and_grads(cfg, params, ptrs, nullptr);
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::uint64_t step, std::size_t count,
                                       std::size_t batch_size) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (batch_size == 0 || batch_size >= count) return idx;
  const std::size_t per_epoch = count / batch_size;
  const std::uint64_t epoch = step / per_epoch;
  const std::size_t slot = static_cast<std::size_t>(step % per_epoch);
  Rng rng(derive_seed(seed, "epoch", epoch));
  std::shuffle(idx.begin(), idx.end(), rng);
  return {idx.begin() + static_cast<std::ptrdiff_t>(slot * batch_size),
          idx.begin() + static_cast<std::ptrdiff_t>((slot + 1) * batch_size)};
}

AugTransform step_transform(std::uint64_t seed, std::uint64_t step, std::size_t index,
                            const TrainOptions& opt) {
  if (!opt.use_aug || !opt.aug.enabled) return AugTransform::identity();
  Rng rng(derive_seed(derive_seed(seed, "aug", step), "sample", index));
  return sample_transform(rng, opt.aug);
}

TrainResult train(TrainState& state, const std::vector<SceneSample>& data, const TrainOptions& opt,
                  const KeyValues& extra, const StepCallback& on_step) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (opt.use_aug) opt.aug.validate();
  if (!(opt.lr >= 0.0) || !(opt.momentum >= 0.0) || !(opt.weight_decay >= 0.0)) {
    throw std::invalid_argument("train: lr, momentum and weight_decay must be >= 0");
  }
  state.lr = opt.lr;
  state.momentum_coef = opt.momentum;
  state.weight_decay = opt.weight_decay;
  for (const auto& s : data) {
    if (s.features.ndim() != 3 || s.features.dim(0) != state.config.in_channels ||
        s.features.dim(1) != state.config.height || s.features.dim(2) != state.config.width ||
        s.masks.ndim() != 3 || s.masks.dim(0) != state.config.num_classes) {
      throw ShapeError("train: sample features " + shape_str(s.features.shape()) + " / masks " +
                       shape_str(s.masks.shape()) + " do not fit model (cin=" +
                       std::to_string(state.config.in_channels) + ", " +
                       std::to_string(state.config.height) + "x" +
                       std::to_string(state.config.width) +
                       ", K=" + std::to_string(state.config.num_classes) + ")");
    }
  }

  KeyValues echo = extra;
  opt.echo(echo);
  auto save = [&] {
    if (opt.checkpoint) save_checkpoint(*opt.checkpoint, state, echo);
  };

  LossLog log(opt.loss_log);
  TrainResult result;
  ParamMap<float> grads;
  const std::uint64_t first = state.step;
  if (opt.steps == 0) save();
  for (std::uint64_t k = 0; k < opt.steps; ++k) {
    const std::uint64_t step = first + k;
    std::vector<SceneSample> augmented;
    std::vector<const SceneSample*> batch;
    const auto idx = batch_indices(state.seed, step, data.size(), opt.batch_size);
    augmented.reserve(idx.size());
    for (std::size_t i : idx) {
      const AugTransform t = step_transform(state.seed, step, i, opt);
      if (t.is_identity()) {
        batch.push_back(&data[i]);
        continue;
      }
      SceneSample a;
      a.features = augment_bev(data[i].features, t);
      a.masks = augment_gt(data[i].masks, t);
      augmented.push_back(std::move(a));
      batch.push_back(&augmented.back());
    }
    double loss = 0.0;
    try {
      loss = loss_and_grads(state.config, state.params, batch, &grads);
      if (!std::isfinite(loss)) throw NonFiniteError("bce_loss", "the training loss");
      sgd_step(state, grads);
    } catch (const std::exception& e) {
      result.aborted = true;
      result.error = "step " + std::to_string(step) + ": " + e.what();
      save();
      return result;
    }
    result.losses.push_back(loss);
    log.write(step, loss);
    if (on_step) on_step(step, loss);
    if (opt.save_every != 0 && state.step % opt.save_every == 0 && k + 1 < opt.steps) save();
  }
  if (opt.steps > 0) save();
  return result;
}

}  // namespace rgcseg
