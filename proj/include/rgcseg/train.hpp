#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rgcseg/augment.hpp"
#include "rgcseg/config.hpp"
#include "rgcseg/model.hpp"
#include "rgcseg/synth.hpp"

namespace rgcseg {

struct TrainOptions {
  std::uint64_t steps = 200;
  std::size_t batch_size = 0;  // 0 = full batch
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0;
  bool use_aug = true;
  AugConfig aug;
  std::uint64_t save_every = 0;  // 0 = only at the end
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> loss_log;

  // train.* and aug.* keys
  void apply(const KeyValues& kv);
  void echo(KeyValues& kv) const;
};

// Mean BCE over `batch` (every element of every sample weighted equally) and
// its gradient with respect to every parameter. One tape per sample keeps
// peak memory flat; gradients are summed in sample order.
double loss_and_grads(const ModelConfig& cfg, const ParamMap<float>& params,
                      const std::vector<const SceneSample*>& batch, ParamMap<float>* grads);

// Loss only, no augmentation.
double dataset_loss(const ModelConfig& cfg, const ParamMap<float>& params,
                    const std::vector<SceneSample>& samples);

// Sample indices drawn at `step`: epochs are seeded permutations of the data
// cut into consecutive batches.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::uint64_t step, std::size_t count,
                                       std::size_t batch_size);

// Augmentation of sample `index` at `step`; identity when disabled.
AugTransform step_transform(std::uint64_t seed, std::uint64_t step, std::size_t index,
                            const TrainOptions& opt);

struct TrainResult {
  std::vector<double> losses;  // loss before the update of each step
  bool aborted = false;
  std::string error;
};

using StepCallback = std::function<void(std::uint64_t step, double loss)>;

// Runs `opt.steps` SGD steps starting from state.step. A non-finite loss or
// gradient stops training without touching the parameters; the checkpoint
// then holds the last good state and the result is marked aborted.
// `extra` is echoed into checkpoint metadata.
TrainResult train(TrainState& state, const std::vector<SceneSample>& data, const TrainOptions& opt,
                  const KeyValues& extra = {}, const StepCallback& on_step = {});

}  // namespace rgcseg
