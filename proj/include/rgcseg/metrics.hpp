#pragma once

// IoU / mIoU with dataset-level count accumulation. A prediction is positive
// where its logit is >= 0 (sigmoid >= 0.5). An empty union scores 1.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rgcseg/config.hpp"
#include "rgcseg/model.hpp"
#include "rgcseg/synth.hpp"
#include "rgcseg/tensor.hpp"

namespace rgcseg {

struct IouCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;

  double iou() const;
  IouCounts& operator+=(const IouCounts& o) {
    intersection += o.intersection;
    union_ += o.union_;
    return *this;
  }
};

// pred, gt: binary masks of equal shape.
IouCounts iou_counts(const TensorF& pred, const TensorF& gt);
double iou(const TensorF& pred, const TensorF& gt);

struct SegMetrics {
  std::vector<double> per_class_iou;
  double miou = 0.0;
  std::vector<IouCounts> counts;
};

class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::size_t num_classes) : counts_(num_classes) {}

  // logits: [K,H,W] or [1,K,H,W]; masks: [K,H,W].
  void add_logits(const TensorF& logits, const TensorF& masks);
  void merge(const MetricAccumulator& other);
  SegMetrics finish() const;
  std::size_t samples() const { return samples_; }

 private:
  std::vector<IouCounts> counts_;
  std::size_t samples_ = 0;
};

// Worker count from RGCSEG_THREADS (unset or 0 = serial).
std::size_t eval_threads();

// Runs the model over every sample. Shards contiguous ranges over `threads`
// workers and merges integer counts, so the result does not depend on the
// worker count. Throws std::invalid_argument on an empty sample list.
SegMetrics evaluate(const ModelConfig& cfg, const ParamMap<float>& params,
                    const std::vector<SceneSample>& samples, std::size_t threads = 0);

// "# key=value" echo lines, then `class,iou`, one row per class, `mean,<miou>`.
std::string format_report(const SegMetrics& m, const KeyValues& echo);
void write_report(const std::filesystem::path& path, const SegMetrics& m, const KeyValues& echo);

}  // namespace rgcseg
