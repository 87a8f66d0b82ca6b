#include "rgcseg/gradsuite.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>

#include "rgcseg/gradcheck.hpp"
#include "rgcseg/model.hpp"
#include "rgcseg/random.hpp"
#include "rgcseg/rgc.hpp"

namespace rgcseg {
namespace {

using Tape = ad::Tape<double>;
using Var = ad::Var;
using Inputs = std::span<const Var>;

struct Case {
  GradFn fn;
  std::vector<TensorD> inputs;
};

using CaseFactory = std::function<Case(Rng&, const std::function<Var(Tape&, Var)>&)>;

TensorD normal(const Shape& s, Rng& rng, double stddev = 1.0) {
  return normal_tensor(s, stddev, rng).cast<double>();
}

// Values bounded away from relu's kink so the central difference never straddles it.
TensorD away_from_zero(const Shape& s, Rng& rng) {
  TensorD t = normal(s, rng);
  for (auto& v : t.data()) v = v >= 0 ? v + 0.1 : v - 0.1;
  return t;
}

TensorD binary(const Shape& s, Rng& rng) {
  TensorD t(s);
  std::bernoulli_distribution coin(0.5);
  for (auto& v : t.data()) v = coin(rng) ? 1.0 : 0.0;
  return t;
}

// sigmoid before the implicit sum makes every output element's gradient
// distinct, so a misrouted backward rule cannot hide behind uniform ones.
Var probe(Tape& t, Var y) { return ad::sigmoid(t, y); }

struct Row {
  std::string name;
  bool full_only;
  CaseFactory make;
};

std::vector<Row> rows() {
  std::vector<Row> r;
  r.push_back({"conv2d", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return probe(t, wrap(t, ad::conv2d(t, in[0], in[1], in[2], {1, 1})));
                             },
                             {normal({1, 2, 5, 5}, rng), normal({3, 2, 3, 3}, rng, 0.5),
                              normal({3}, rng)}};
               }});
  r.push_back({"conv2d_strided", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return probe(t, wrap(t, ad::conv2d(t, in[0], in[1], in[2], {2, 0})));
                             },
                             {normal({2, 2, 6, 6}, rng), normal({3, 2, 2, 2}, rng, 0.5),
                              normal({3}, rng)}};
               }});
  r.push_back({"matmul", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return probe(t, wrap(t, ad::matmul(t, in[0], in[1])));
                             },
                             {normal({3, 4}, rng), normal({4, 5}, rng)}};
               }});
  r.push_back({"bilinear_upsample", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return probe(t, wrap(t, ad::bilinear_upsample(t, in[0], 3)));
                             },
                             {normal({1, 2, 3, 4}, rng)}};
               }});
  r.push_back({"concat_channels", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return probe(t, wrap(t, ad::concat_channels(t, in[0], in[1])));
                             },
                             {normal({2, 2, 3, 3}, rng), normal({2, 3, 3, 3}, rng)}};
               }});
  r.push_back({"reshape", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               Var y = ad::reshape(t, in[0], {4, 9});
                               return probe(t, wrap(t, ad::matmul(t, y, in[1])));
                             },
                             {normal({1, 4, 3, 3}, rng), normal({9, 2}, rng)}};
               }});
  r.push_back({"add", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return probe(t, wrap(t, ad::add(t, in[0], in[1])));
                             },
                             {normal({2, 3, 4}, rng), normal({2, 3, 4}, rng)}};
               }});
  r.push_back({"scale_by", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return probe(t, wrap(t, ad::scale_by(t, in[0], -1.75)));
                             },
                             {normal({3, 5}, rng)}};
               }});
  r.push_back({"relu", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return probe(t, wrap(t, ad::relu(t, in[0])));
                             },
                             {away_from_zero({4, 6}, rng)}};
               }});
  r.push_back({"sigmoid", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return wrap(t, ad::sigmoid(t, ad::scale_by(t, in[0], 2.0)));
                             },
                             {normal({4, 6}, rng)}};
               }});
  r.push_back({"select_stack_batch", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               Var a = ad::select_batch(t, in[0], 1);
                               Var b = ad::select_batch(t, in[0], 0);
                               return probe(t, wrap(t, ad::stack_batch(t, std::vector<Var>{a, b, a})));
                             },
                             {normal({2, 2, 3, 3}, rng)}};
               }});
  r.push_back({"bce_loss", false, [](Rng& rng, auto wrap) {
                 auto masks = std::make_shared<TensorD>(binary({1, 3, 4, 4}, rng));
                 return Case{[wrap, masks](Tape& t, Inputs in) {
                               return wrap(t, ad::bce_loss(t, ad::scale_by(t, in[0], 3.0),
                                                           t.constant(*masks)));
                             },
                             {normal({1, 3, 4, 4}, rng)}};
               }});
  r.push_back({"rgc_layer", false, [](Rng& rng, auto wrap) {
                 return Case{[wrap](Tape& t, Inputs in) {
                               return probe(t, wrap(t, ad_rgc::rgc_layer(t, in[0], in[1], in[2])));
                             },
                             {normal({3, 4}, rng), normal({3, 3}, rng), normal({4, 4}, rng)}};
               }});

  // End-to-end rows.
  r.push_back({"rgc_forward", true, [](Rng& rng, auto wrap) {
                 const auto p = init_graph_params(rng(), 4, 8, 8, 2).cast<double>();
                 std::vector<TensorD> inputs{normal({1, 4, 8, 8}, rng), p.adjacency[0],
                                             p.channel_mix[0], p.phi_weight, p.phi_bias,
                                             p.sigma_weight, p.sigma_bias};
                 // Non-zero graph matrices keep the graph branch's gradient well above eps.
                 inputs[1] = normal(inputs[1].shape(), rng, 0.3);
                 inputs[2] = normal(inputs[2].shape(), rng, 0.3);
                 inputs[4] = normal(inputs[4].shape(), rng, 0.1);
                 inputs[6] = normal(inputs[6].shape(), rng, 0.1);
                 return Case{[wrap](Tape& t, Inputs in) {
                               RgcVars v;
                               v.stride = 2;
                               v.adjacency = {in[1]};
                               v.channel_mix = {in[2]};
                               v.phi_weight = in[3];
                               v.phi_bias = in[4];
                               v.sigma_weight = in[5];
                               v.sigma_bias = in[6];
                               return probe(t, wrap(t, ad_rgc::rgc_forward(t, in[0], v)));
                             },
                             inputs};
               }});
  auto model_case = [](ModelConfig cfg, Shape input_shape, int which) {
    return [cfg, input_shape, which](Rng& rng, const std::function<Var(Tape&, Var)>& wrap) {
      TrainState s = build_model(cfg, rng());
      std::vector<std::string> names;
      std::vector<TensorD> inputs{normal(input_shape, rng)};
      for (const auto& [name, p] : s.params) {
        const bool used = which == 2 || (which == 0 && name.rfind("enc.", 0) == 0) ||
                          (which == 1 && name.rfind("head.", 0) == 0);
        if (!used) continue;
        names.push_back(name);
        // Random biases and graph matrices so no parameter sits at a degenerate zero.
        TensorD v = p.cast<double>();
        if (name.ends_with(".b") || name.ends_with("A_G") || name.ends_with("W_G")) {
          v = normal(v.shape(), rng, 0.1);
        }
        inputs.push_back(std::move(v));
      }
      auto masks = std::make_shared<TensorD>(
          binary({input_shape[0], cfg.num_classes, input_shape[2], input_shape[3]}, rng));
      return Case{[wrap, names, cfg, which, masks](Tape& t, Inputs in) {
                    VarMap vars;
                    for (std::size_t i = 0; i < names.size(); ++i) vars[names[i]] = in[i + 1];
                    if (which == 0) return probe(t, wrap(t, encoder_forward(t, in[0], cfg, vars)));
                    if (which == 1) return probe(t, wrap(t, head_forward(t, in[0], cfg, vars)));
                    Var logits = wrap(t, model_forward(t, in[0], cfg, vars));
                    return ad::bce_loss(t, logits, t.constant(*masks));
                  },
                  inputs};
    };
  };
  ModelConfig enc;
  enc.in_channels = 2;
  enc.channels = 3;
  enc.height = enc.width = 8;
  enc.use_rgc = false;
  r.push_back({"encoder", true, model_case(enc, {1, 2, 8, 8}, 0)});
  ModelConfig head = enc;
  head.channels = 2;
  head.use_rgc = true;
  head.stride = 2;
  head.num_classes = 3;
  r.push_back({"head", true, model_case(head, {1, 4, 8, 8}, 1)});
  ModelConfig full;
  full.in_channels = 2;
  full.channels = 2;
  full.height = full.width = 8;
  full.stride = 2;
  full.num_classes = 6;
  r.push_back({"loss@model", true, model_case(full, {1, 2, 8, 8}, 2)});
  return r;
}

}  // namespace

std::vector<std::string> grad_suite_row_names(bool full) {
  std::vector<std::string> names;
  for (const auto& r : rows()) {
    if (!r.full_only || full) names.push_back(r.name);
  }
  return names;
}

std::vector<GradSuiteRow> run_grad_suite(const GradSuiteOptions& opt) {
  std::vector<GradSuiteRow> out;
  for (const auto& row : rows()) {
    if (row.full_only && !opt.full) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const bool sabotaged = row.name == opt.sabotage;
    auto wrap = [sabotaged](Tape& t, Var y) { return sabotaged ? ad::sabotage(t, y, 1.5) : y; };
    GradSuiteRow result;
    result.name = row.name;
    for (std::size_t k = 0; k < opt.seeds_per_row; ++k) {
      Rng rng(derive_seed(opt.seed, row.name, k));
      const Case c = row.make(rng, wrap);
      result.max_rel_error =
          std::max(result.max_rel_error, grad_check(c.fn, c.inputs, opt.eps));
    }
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.pass = result.max_rel_error < opt.tolerance;
    out.push_back(result);
  }
  return out;
}

}  // namespace rgcseg
