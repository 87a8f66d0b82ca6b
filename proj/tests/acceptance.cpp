// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rgcseg/augment.hpp"
#include "rgcseg/cli.hpp"
#include "rgcseg/gradsuite.hpp"
#include "rgcseg/metrics.hpp"
#include "rgcseg/ops.hpp"
#include "rgcseg/random.hpp"
#include "rgcseg/rgc.hpp"
#include "rgcseg/synth.hpp"
#include "rgcseg/train.hpp"

using namespace rgcseg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* what, const Outcome& o) {
  std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, what, o.detail.c_str());
  std::fflush(stdout);
  failures += !o.pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// 1 -------------------------------------------------------------------------

Outcome gradcheck_full() {
  const auto t0 = Clock::now();
  GradSuiteOptions opt;
  opt.full = true;
  const auto rows = run_grad_suite(opt);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  bool all = true, has_model = false;
  for (const auto& r : rows) {
    all = all && r.pass && r.max_rel_error < 1e-6;
    has_model = has_model || r.name == "loss@model";
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
  }
  return {all && has_model && secs < 120.0,
          fmt("%zu rows, worst %.3e (%s), %.1f s", rows.size(), worst, worst_name.c_str(), secs)};
}

// 2 -------------------------------------------------------------------------

template <typename T>
double max_abs_diff(const std::vector<T>& got, const std::vector<T>& want) {
  double m = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) m = std::max(m, std::abs(double(got[i]) - double(want[i])));
  return got.size() == want.size() ? m : INFINITY;
}

// Worst error of `instance` over `count` seeded draws. Inputs are U(-1,1) so
// an absolute tolerance is meaningful in f32.
double oracle_sweep(const std::function<double(Rng&)>& instance, int count, std::uint64_t salt) {
  double worst = 0.0;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(salt, "oracle", static_cast<std::uint64_t>(i)));
    worst = std::max(worst, instance(rng));
  }
  return worst;
}

template <typename T>
Tensor<T> rand_t(const Shape& s, Rng& rng) {
  return uniform_tensor(s, -1.0, 1.0, rng).template cast<T>();
}

template <typename T>
double conv_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> small(1, 4), size(3, 10), k(1, 3);
  std::uniform_int_distribution<int> st(1, 2), pd(0, 1);
  const std::size_t n = small(rng), cin = small(rng), cout = small(rng), h = size(rng), w = size(rng);
  const std::size_t kh = k(rng), kw = k(rng);
  const int stride = st(rng), pad = pd(rng);
  const auto x = rand_t<T>({n, cin, h, w}, rng), wt = rand_t<T>({cout, cin, kh, kw}, rng),
             b = rand_t<T>({cout}, rng);
  std::size_t ho, wo;
  const auto ref = oracle::conv2d(x.vec(), {n, cin, h, w}, wt.vec(), cout, kh, kw, b.vec(), stride, pad, ho, wo);
  return max_abs_diff(ops::conv2d(x, wt, b, {stride, pad}).vec(), ref);
}

template <typename T>
double matmul_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(1, 24);
  const std::size_t m = d(rng), k = d(rng), n = d(rng);
  const auto a = rand_t<T>({m, k}, rng), b = rand_t<T>({k, n}, rng);
  return max_abs_diff(ops::matmul(a, b).vec(), oracle::matmul(a.vec(), b.vec(), m, k, n));
}

template <typename T>
double bilinear_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> small(1, 3), size(1, 8);
  std::uniform_int_distribution<int> sc(1, 8);
  const std::size_t n = small(rng), c = small(rng), h = size(rng), w = size(rng);
  const int s = sc(rng);
  const auto x = rand_t<T>({n, c, h, w}, rng);
  return max_abs_diff(ops::bilinear_upsample(x, s).vec(), oracle::bilinear(x.vec(), {n, c, h, w}, s));
}

template <typename T>
double rgc_layer_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(1, 8);
  const std::size_t c = d(rng), dn = d(rng);
  const auto w = rand_t<T>({c, c}, rng), v = rand_t<T>({c, dn}, rng), a = rand_t<T>({dn, dn}, rng);
  // Double chain on the same (possibly f32-rounded) inputs.
  const auto wd = w.template cast<double>(), vd = v.template cast<double>(), ad = a.template cast<double>();
  const auto ref = oracle::matmul(oracle::matmul(wd.vec(), vd.vec(), c, c, dn), ad.vec(), c, dn, dn);
  const auto got = rgc_layer(v, w, a).template cast<double>();
  return max_abs_diff(got.vec(), ref);
}

Outcome oracle_equivalence() {
  constexpr int kInstances = 25;
  struct Row {
    const char* name;
    double f32, f64;
  };
  const std::vector<Row> rows = {
      {"conv2d", oracle_sweep(conv_instance<float>, kInstances, 1),
       oracle_sweep(conv_instance<double>, kInstances, 1)},
      {"matmul", oracle_sweep(matmul_instance<float>, kInstances, 2),
       oracle_sweep(matmul_instance<double>, kInstances, 2)},
      {"bilinear", oracle_sweep(bilinear_instance<float>, kInstances, 3),
       oracle_sweep(bilinear_instance<double>, kInstances, 3)},
      {"rgc_layer", oracle_sweep(rgc_layer_instance<float>, kInstances, 4),
       oracle_sweep(rgc_layer_instance<double>, kInstances, 4)},
  };
  bool ok = true;
  std::string detail = fmt("%d instances each;", kInstances);
  for (const auto& r : rows) {
    ok = ok && r.f32 < 1e-6 && r.f64 < 1e-12;
    detail += fmt(" %s f32 %.1e f64 %.1e;", r.name, r.f32, r.f64);
  }
  detail.pop_back();
  return {ok, detail};
}

// 3 -------------------------------------------------------------------------

template <typename T>
double fixed_point_error(double c, std::size_t ch, std::size_t hw, int d) {
  GraphParams<T> p;
  p.stride = d;
  p.channels = ch;
  p.height = p.width = hw;
  const auto ud = static_cast<std::size_t>(d);
  const std::size_t dn = p.nodes();
  Tensor<T> a({dn, dn}), w({ch, ch});
  for (std::size_t i = 0; i < dn; ++i) a.at(i, i) = 1;
  for (std::size_t i = 0; i < ch; ++i) w.at(i, i) = 1;
  p.adjacency.push_back(a);
  p.channel_mix.push_back(w);
  p.phi_weight = Tensor<T>({ch, ch, ud, ud});
  for (std::size_t o = 0; o < ch; ++o)
    for (std::size_t i = 0; i < ud * ud; ++i) p.phi_weight[(o * ch + o) * ud * ud + i] = T(1) / T(d * d);
  p.phi_bias = Tensor<T>({ch});
  p.sigma_weight = Tensor<T>({ch, ch, ud, ud});
  p.sigma_bias = Tensor<T>({ch});
  const Tensor<T> x({1, ch, hw, hw}, static_cast<T>(c));
  const Tensor<T> y = rgc_forward(x, p);
  const std::size_t plane = hw * hw;
  double worst = 0.0;
  for (std::size_t i = ch * plane; i < 2 * ch * plane; ++i) {
    worst = std::max(worst, std::abs(double(y[i]) - double(static_cast<T>(c))));
  }
  return y.dim(1) == 2 * ch ? worst : INFINITY;
}

Outcome fixed_point() {
  // f32 constants stay at unit scale, where one ulp is well under 1e-6.
  Rng rng(3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), wide(-100.0, 100.0);
  double worst = 0.0;
  int cases = 0;
  for (int i = 0; i < 10; ++i) {
    worst = std::max(worst, fixed_point_error<float>(unit(rng), 8, 32, 4));
    worst = std::max(worst, fixed_point_error<double>(wide(rng), 8, 32, 8));
    cases += 2;
  }
  worst = std::max(worst, fixed_point_error<float>(1.0, 16, 64, 8));
  ++cases;
  return {worst < 1e-6, fmt("%d constant inputs, max |out - c| over channels C..2C = %.2e", cases, worst)};
}

// 4 -------------------------------------------------------------------------

template <typename T>
Tensor<T> permute_all(const Tensor<T>& x, int quarter_turns, bool fx, bool fy) {
  const std::size_t n = x.shape().back(), plane = n * n;
  Tensor<T> out(x.shape());
  for (std::size_t p = 0; p < x.numel() / plane; ++p) {
    std::vector<T> v(x.vec().begin() + p * plane, x.vec().begin() + (p + 1) * plane);
    for (int q = 0; q < quarter_turns; ++q) v = oracle::rot90(v, n);
    if (fx) v = oracle::flip_cols(v, n, n);
    if (fy) v = oracle::flip_rows(v, n, n);
    std::copy(v.begin(), v.end(), out.data().begin() + p * plane);
  }
  return out;
}

Outcome alignment() {
  constexpr double kPi = std::numbers::pi;
  Rng rng(4);
  const auto bev = normal_tensor({2, 4, 16, 16}, 1.0, rng);
  TensorF masks({kNumClasses, 16, 16});
  std::bernoulli_distribution b(0.3);
  for (auto& v : masks.data()) v = b(rng) ? 1.0f : 0.0f;
  int exact = 0;
  const std::pair<double, int> turns[] = {{0.0, 0}, {kPi / 2, 1}, {kPi, 2}, {-kPi / 2, 3}};
  for (const auto& [theta, q] : turns)
    for (bool fx : {false, true})
      for (bool fy : {false, true}) {
        const auto t = AugTransform::make(theta, fx, fy, 1.0);
        exact += augment_bev(bev, t) == permute_all(bev, q, fx, fy) &&
                 augment_gt(masks, t) == permute_all(masks, q, fx, fy);
      }
  std::uniform_real_distribution<double> u(-kPi, kPi);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double th = u(rng);
    worst = std::max(worst, std::abs(recover_angle(rotation_matrix(th)) + th));
  }
  return {exact == 16 && worst < 1e-12,
          fmt("%d/16 exact transforms match; recover_angle max |err| %.1e over 100 angles", exact, worst)};
}

// 5 -------------------------------------------------------------------------

constexpr std::uint64_t kOverfitDataSeed = 1;
constexpr std::uint64_t kOverfitModelSeed = 1;

Outcome overfit() {
  const auto t0 = Clock::now();
  const Dataset ds = generate_dataset(kOverfitDataSeed, 32, SceneSpec{});
  ModelConfig cfg;  // 64x64, C=16, d=8
  TrainState st = build_model(cfg, kOverfitModelSeed);
  TrainOptions opt;
  opt.steps = 200;
  opt.lr = 0.05;
  opt.momentum = 0.9;
  opt.batch_size = 0;
  opt.use_aug = false;
  const TrainResult r = train(st, ds.samples, opt);
  if (r.aborted) return {false, "training aborted: " + r.error};
  const double initial = r.losses.front();
  const double final_loss = dataset_loss(cfg, st.params, ds.samples);
  const SegMetrics m = evaluate(cfg, st.params, ds.samples);
  const double secs = seconds_since(t0);
  const double drop = 1.0 - final_loss / initial;
  std::string per_class;
  for (std::size_t k = 0; k < kNumClasses; ++k) per_class += fmt(" %s=%.3f", std::string(kClassNames[k]).c_str(), m.per_class_iou[k]);
  return {drop >= 0.5 && m.miou > 0.9 && secs < 600.0,
          fmt("loss %.4f -> %.4f (-%.1f%%), train mIoU %.4f, %.0f s;", initial, final_loss, 100 * drop, m.miou,
              secs) +
              per_class};
}

// 6 -------------------------------------------------------------------------

constexpr std::uint64_t kTrainSeed = 100;
constexpr std::uint64_t kValSeed = 200;
constexpr std::size_t kAblationBatch = 8;
constexpr std::uint64_t kAblationSteps = 700;

Outcome ablation() {
  const auto t0 = Clock::now();
  const Dataset train_set = generate_dataset(kTrainSeed, 500, SceneSpec{});
  const Dataset val_set = generate_dataset(kValSeed, 100, SceneSpec{});
  struct Variant {
    char letter;
    bool aug, rgc;
    double sum = 0.0;
  };
  Variant vs[] = {{'A', false, false}, {'C', true, false}, {'E', true, true}};
  std::string detail;
  for (auto& v : vs) {
    detail += fmt(" %c[", v.letter);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      ModelConfig cfg;
      cfg.use_rgc = v.rgc;
      TrainState st = build_model(cfg, seed);
      TrainOptions opt;
      opt.steps = kAblationSteps;
      opt.batch_size = kAblationBatch;
      opt.use_aug = v.aug;
      const TrainResult r = train(st, train_set.samples, opt);
      if (r.aborted) return {false, fmt("variant %c seed %llu aborted: ", v.letter, (unsigned long long)seed) + r.error};
      const double miou = evaluate(cfg, st.params, val_set.samples).miou;
      v.sum += miou;
      detail += fmt("%s%.4f", seed ? " " : "", miou);
    }
    detail += fmt("] mean %.4f;", v.sum / 3);
  }
  const double a = vs[0].sum / 3, c = vs[1].sum / 3, e = vs[2].sum / 3;
  const double secs = seconds_since(t0);
  return {e >= c + 0.01 && c >= a + 0.01 && secs < 45 * 60,
          fmt("E-C %+.4f, C-A %+.4f, %.0f s;", e - c, c - a, secs) + detail};
}

// 7 -------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "rgcseg_acceptance_det";
  fs::remove_all(root);
  auto run = [&](const std::string& tag, const char* threads) {
    const fs::path dir = root / tag;
    ::setenv("RGCSEG_THREADS", threads, 1);
    std::ostringstream out, err;
    const auto s = [](const fs::path& p) { return p.string(); };
    int rc = run_cli({"gen-data", "--out", s(dir / "data"), "--num", "8", "--seed", "7", "--size", "64"}, out, err);
    rc |= run_cli({"train", "--data", s(dir / "data"), "--out", s(dir / "c.rgct"), "--steps", "4", "--batch-size", "4",
                   "--save-every", "2", "--seed", "3"},
                  out, err);
    rc |= run_cli({"eval", "--ckpt", s(dir / "c.rgct"), "--data", s(dir / "data"), "--report", s(dir / "r.csv")}, out,
                  err);
    return std::make_tuple(rc, slurp(dir / "c.rgct"), slurp(dir / "r.csv"), slurp(dir / "c.rgct.loss.csv"));
  };
  const auto a = run("a", "0"), b = run("b", "3");
  ::unsetenv("RGCSEG_THREADS");
  fs::remove_all(root);
  const bool ran = std::get<0>(a) == 0 && std::get<0>(b) == 0 && !std::get<1>(a).empty();
  const bool same = std::get<1>(a) == std::get<1>(b) && std::get<2>(a) == std::get<2>(b) &&
                    std::get<3>(a) == std::get<3>(b);
  return {ran && same, fmt("gen-data/train(aug+rgc)/eval twice (eval threads 0 vs 3): checkpoint %zu B %s, report %s, "
                           "loss log %s",
                           std::get<1>(a).size(), std::get<1>(a) == std::get<1>(b) ? "identical" : "DIFFERS",
                           std::get<2>(a) == std::get<2>(b) ? "identical" : "DIFFERS",
                           std::get<3>(a) == std::get<3>(b) ? "identical" : "DIFFERS")};
}

// 8 -------------------------------------------------------------------------

Outcome head_structure() {
  bool ok = true;
  std::string detail;
  for (bool rgc : {true, false}) {
    ModelConfig cfg;
    cfg.use_rgc = rgc;
    const TrainState st = build_model(cfg, 0);
    std::size_t convs = 0;
    for (const auto& [name, p] : st.params) {
      if (name.rfind("head.", 0) == 0 && name.size() > 2 && name.substr(name.size() - 2) == ".w" && p.ndim() == 4) ++convs;
    }
    const std::size_t head_in = st.params.at("head.0.w").dim(1);
    const TensorF logits = predict_logits(cfg, st.params, TensorF({1, cfg.in_channels, cfg.height, cfg.width}));
    const bool shape_ok = logits.shape() == Shape{1, kNumClasses, cfg.height, cfg.width};
    ok = ok && convs == 9 && shape_ok && head_in == (rgc ? 2 * cfg.channels : cfg.channels);
    detail += fmt("%s: head input %zu (C=%zu), %zu conv layers, logits %s; ", rgc ? "rgc" : "no-rgc", head_in,
                  cfg.channels, convs, shape_ok ? "ok" : "bad shape");
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

// Optional arguments select criterion ids; default runs all eight.
int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradcheck --full", gradcheck_full}, {"oracle equivalence", oracle_equivalence},
      {"RGC fixed point", fixed_point},     {"augmentation alignment", alignment},
      {"overfit sanity", overfit},          {"directional ablation", ablation},
      {"determinism", determinism},         {"head structure", head_structure},
  };
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (id < 1 || id > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "acceptance: unknown criterion '%s'\n", argv[i]);
      return 2;
    }
    selected[static_cast<std::size_t>(id - 1)] = true;
  }
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (selected[i]) report(static_cast<int>(i + 1), criteria[i].first, guarded(criteria[i].second));
  }
  return failures == 0 ? 0 : 1;
}
