#include "rgcseg/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "rgcseg/checkpoint.hpp"
#include "rgcseg/gradsuite.hpp"
#include "rgcseg/metrics.hpp"
#include "rgcseg/render.hpp"
#include "rgcseg/synth.hpp"
#include "rgcseg/train.hpp"

namespace rgcseg {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) throw UsageError(std::string(what) + " not found: " + path);
}

KeyValues dataset_echo(const Dataset& ds) {
  KeyValues kv;
  kv["data.count"] = std::to_string(ds.samples.size());
  kv["data.seed"] = std::to_string(ds.base_seed);
  kv["data.version"] = std::string(kGeneratorVersion);
  return kv;
}

struct GenDataArgs {
  std::string out;
  std::size_t num = 0;
  std::uint64_t seed = 0;
  std::size_t size = 64;
  std::size_t cin = 4;
  double noise = 0.1;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  if (a.num == 0) throw UsageError("--num must be >= 1");
  SceneSpec spec;
  spec.height = spec.width = a.size;
  spec.in_channels = a.cin;
  spec.noise_sigma = a.noise;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Dataset ds = generate_dataset(a.seed, a.num, spec);
  write_dataset(ds, a.out);
  out << "wrote " << a.num << " samples to " << a.out << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string data, config, out, log;
  bool no_rgc = false, no_aug = false;
  std::optional<std::uint64_t> steps, seed, batch_size, save_every;
  std::optional<double> lr;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  require_dir(a.data, "dataset directory");
  KeyValues kv;
  if (!a.config.empty()) {
    require_file(a.config, "config file");
    kv = load_key_values(a.config);
  }
  if (a.no_rgc) kv["model.use_rgc"] = "false";
  if (a.no_aug) kv["aug.enabled"] = "false";
  if (a.steps) kv["train.steps"] = std::to_string(*a.steps);
  if (a.seed) kv["seed"] = std::to_string(*a.seed);
  if (a.batch_size) kv["train.batch_size"] = std::to_string(*a.batch_size);
  if (a.save_every) kv["train.save_every"] = std::to_string(*a.save_every);
  if (a.lr) kv["train.lr"] = format_double(*a.lr);

  const Dataset ds = read_dataset(a.data);
  ModelConfig cfg;
  cfg.in_channels = ds.spec.in_channels;
  cfg.height = ds.spec.height;
  cfg.width = ds.spec.width;
  cfg.apply(kv);
  cfg.validate();
  TrainOptions opt;
  opt.apply(kv);
  opt.checkpoint = fs::path(a.out);
  opt.loss_log = fs::path(a.log.empty() ? a.out + ".loss.csv" : a.log);
  const std::uint64_t seed = kv_uint(kv, "seed", 0);

  TrainState state = build_model(cfg, seed);
  KeyValues echo = dataset_echo(ds);
  echo["variant"] = std::string(1, variant_letter(opt.use_aug, cfg.use_rgc));
  const TrainResult r = train(state, ds.samples, opt, echo);
  if (r.aborted) {
    err << "train: aborted at " << one_line(r.error) << "; last good checkpoint kept in " << a.out
        << '\n';
    return kExitFailure;
  }
  out << "variant " << variant_letter(opt.use_aug, cfg.use_rgc) << ": " << r.losses.size()
      << " steps";
  if (!r.losses.empty()) {
    out << ", loss " << format_double(r.losses.front()) << " -> " << format_double(r.losses.back());
  }
  out << ", checkpoint " << a.out << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string ckpt, data, report;
};

void check_compatible(const ModelConfig& cfg, const Dataset& ds) {
  const Shape expected{cfg.in_channels, cfg.height, cfg.width};
  const Shape found{ds.spec.in_channels, ds.spec.height, ds.spec.width};
  if (expected != found || cfg.num_classes != kNumClasses) {
    throw ShapeError("checkpoint expects features " + shape_str(expected) + " with " +
                     std::to_string(cfg.num_classes) + " classes, dataset has " +
                     shape_str(found) + " with " + std::to_string(kNumClasses));
  }
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_file(a.ckpt, "checkpoint");
  require_dir(a.data, "dataset directory");
  const LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  const Dataset ds = read_dataset(a.data);
  check_compatible(ck.state.config, ds);
  const SegMetrics m = evaluate(ck.state.config, ck.state.params, ds.samples, eval_threads());
  KeyValues echo = ck.meta;
  for (const auto& [k, v] : dataset_echo(ds)) echo["eval." + k] = v;
  write_report(a.report, m, echo);
  out << format_report(m, {});
  return kExitOk;
}

struct GradArgs {
  bool full = false;
  std::string sabotage;
};

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
  GradSuiteOptions opt;
  opt.full = a.full;
  opt.sabotage = a.sabotage;
  bool ok = true;
  char line[160];
  std::snprintf(line, sizeof(line), "%-20s %-14s %-9s %s\n", "op", "max_rel_error", "seconds",
                "status");
  out << line;
  for (const auto& r : run_grad_suite(opt)) {
    std::snprintf(line, sizeof(line), "%-20s %-14.3e %-9.2f %s\n", r.name.c_str(),
                  r.max_rel_error, r.seconds, r.pass ? "ok" : "FAIL");
    out << line;
    ok = ok && r.pass;
  }
  return ok ? kExitOk : kExitFailure;
}

struct RenderArgs {
  std::string ckpt, data, out;
  std::size_t num = 4;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  require_file(a.ckpt, "checkpoint");
  require_dir(a.data, "dataset directory");
  const LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  const Dataset ds = read_dataset(a.data);
  check_compatible(ck.state.config, ds);
  const auto files = render_samples(ck.state.config, ck.state.params, ds.samples, a.num, a.out);
  out << "wrote " << files.size() << " files to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

char variant_letter(bool use_aug, bool use_rgc) {
  if (use_aug) return use_rgc ? 'E' : 'C';
  return use_rgc ? 'B' : 'A';
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Residual graph convolution BEV segmentation toolkit", "rgcseg"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic BEV dataset");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--num", gen.num, "Number of samples")->required();
  g->add_option("--seed", gen.seed, "Base seed")->required();
  g->add_option("--size", gen.size, "Raster height and width")->required();
  g->add_option("--cin", gen.cin, "Feature channels");
  g->add_option("--noise", gen.noise, "Gaussian noise sigma");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--config", tr.config, "key=value config file");
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--log", tr.log, "Loss log CSV (default <out>.loss.csv)");
  t->add_flag("--no-rgc", tr.no_rgc, "Disable the RGC block");
  t->add_flag("--no-aug", tr.no_aug, "Disable augmentation");
  t->add_option("--steps", tr.steps, "SGD steps");
  t->add_option("--seed", tr.seed, "Model and training seed");
  t->add_option("--batch-size", tr.batch_size, "Samples per step (0 = full batch)");
  t->add_option("--save-every", tr.save_every, "Checkpoint interval in steps");
  t->add_option("--lr", tr.lr, "Learning rate");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--report", ev.report, "Report CSV")->required();

  GradArgs gr;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gc->add_flag("--full", gr.full, "Include end-to-end rows");
  gc->add_option("--sabotage", gr.sabotage, "Corrupt one row's gradient (test fixture)")
      ->group("");

  RenderArgs rd;
  auto* r = app.add_subcommand("render", "Write predicted and ground-truth mask images");
  r->add_option("--ckpt", rd.ckpt, "Checkpoint")->required();
  r->add_option("--data", rd.data, "Dataset directory")->required();
  r->add_option("--out", rd.out, "Output directory")->required();
  r->add_option("--num", rd.num, "Number of samples");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << one_line(ex.what()) << '\n';
    return kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "gen-data") return cmd_gen_data(gen, out);
    if (name == "train") return cmd_train(tr, out, err);
    if (name == "eval") return cmd_eval(ev, out);
    if (name == "gradcheck") return cmd_gradcheck(gr, out);
    if (name == "render") return cmd_render(rd, out);
  } catch (const UsageError& ex) {
    err << name << ": " << one_line(ex.what()) << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << name << ": " << one_line(ex.what()) << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace rgcseg
