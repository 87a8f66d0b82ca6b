#include "rgcseg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rgcseg {

double IouCounts::iou() const {
  if (union_ == 0) return 1.0;
  return static_cast<double>(intersection) / static_cast<double>(union_);
}

IouCounts iou_counts(const TensorF& pred, const TensorF& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("iou: prediction " + shape_str(pred.shape()) + " vs ground truth " +
                     shape_str(gt.shape()));
  }
  IouCounts c;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const bool p = pred[i] != 0.0f;
    const bool g = gt[i] != 0.0f;
    c.intersection += (p && g) ? 1 : 0;
    c.union_ += (p || g) ? 1 : 0;
  }
  return c;
}

double iou(const TensorF& pred, const TensorF& gt) { return iou_counts(pred, gt).iou(); }

void MetricAccumulator::add_logits(const TensorF& logits, const TensorF& masks) {
  const std::size_t k = counts_.size();
  const bool batched = logits.ndim() == 4;
  if ((batched && logits.dim(0) != 1) || (!batched && logits.ndim() != 3) ||
      masks.ndim() != 3 || masks.dim(0) != k ||
      logits.numel() != masks.numel()) {
    throw ShapeError("metrics: logits " + shape_str(logits.shape()) + " vs masks " +
                     shape_str(masks.shape()) + " for " + std::to_string(k) + " classes");
  }
  const std::size_t plane = masks.dim(1) * masks.dim(2);
  for (std::size_t c = 0; c < k; ++c) {
    IouCounts& acc = counts_[c];
    for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
      const bool p = logits[i] >= 0.0f;
      const bool g = masks[i] != 0.0f;
      acc.intersection += (p && g) ? 1 : 0;
      acc.union_ += (p || g) ? 1 : 0;
    }
  }
  ++samples_;
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
  if (other.counts_.size() != counts_.size()) {
    throw std::invalid_argument("metrics: merging accumulators with different class counts");
  }
  for (std::size_t c = 0; c < counts_.size(); ++c) counts_[c] += other.counts_[c];
  samples_ += other.samples_;
}

SegMetrics MetricAccumulator::finish() const {
  SegMetrics m;
  m.counts = counts_;
  double total = 0.0;
  for (const auto& c : counts_) {
    m.per_class_iou.push_back(c.iou());
    total += m.per_class_iou.back();
  }
  m.miou = counts_.empty() ? 0.0 : total / static_cast<double>(counts_.size());
  return m;
}

std::size_t eval_threads() {
  const char* env = std::getenv("RGCSEG_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0) {
    throw std::invalid_argument(std::string("RGCSEG_THREADS must be a non-negative integer, got '") +
                                env + "'");
  }
  return static_cast<std::size_t>(v);
}

SegMetrics evaluate(const ModelConfig& cfg, const ParamMap<float>& params,
                    const std::vector<SceneSample>& samples, std::size_t threads) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, samples.size());
  std::vector<MetricAccumulator> partial(workers, MetricAccumulator(cfg.num_classes));
  auto run = [&](std::size_t w) {
    const std::size_t lo = samples.size() * w / workers;
    const std::size_t hi = samples.size() * (w + 1) / workers;
    for (std::size_t i = lo; i < hi; ++i) {
      partial[w].add_logits(predict_logits(cfg, params, samples[i].features), samples[i].masks);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  MetricAccumulator total(cfg.num_classes);
  for (const auto& p : partial) total.merge(p);
  return total.finish();
}

std::string format_report(const SegMetrics& m, const KeyValues& echo) {
  std::ostringstream os;
  os << format_key_values(echo, "# ");
  os << "class,iou\n";
  char buf[32];
  for (std::size_t c = 0; c < m.per_class_iou.size(); ++c) {
    const std::string name =
        c < kClassNames.size() ? std::string(kClassNames[c]) : "class" + std::to_string(c);
    std::snprintf(buf, sizeof(buf), "%.6f", m.per_class_iou[c]);
    os << name << ',' << buf << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.6f", m.miou);
  os << "mean," << buf << '\n';
  return os.str();
}

void write_report(const std::filesystem::path& path, const SegMetrics& m, const KeyValues& echo) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path.string() + ": cannot open report for writing");
  os << format_report(m, echo);
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace rgcseg
