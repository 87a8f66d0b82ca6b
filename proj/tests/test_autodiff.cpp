#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rgcseg/autodiff.hpp"
#include "rgcseg/gradcheck.hpp"
#include "rgcseg/gradsuite.hpp"
#include "rgcseg/random.hpp"

using namespace rgcseg;

namespace {

TensorD randn(const Shape& s, Rng& rng) { return normal_tensor(s, 1.0, rng).cast<double>(); }

}  // namespace

TEST(Tape, NodeIdsAreTopological) {
  ad::Tape<double> t;
  auto x = t.leaf(TensorD({2}, {1.0, 2.0}));
  auto y = ad::relu(t, x);
  auto z = ad::add(t, y, x);
  for (std::size_t id = 0; id < t.size(); ++id) {
    for (auto p : t.parents(id)) EXPECT_LT(p.id, id);
  }
  EXPECT_EQ(z.id, t.size() - 1);
}

TEST(Tape, SharedInputAccumulatesOnce) {
  // d/dx sum(x + x) = 2; a double visit of the add node would give 4.
  ad::Tape<double> t;
  auto x = t.leaf(TensorD({3}, {1.0, -2.0, 0.5}));
  auto s = ad::sum(t, ad::add(t, x, x));
  t.backward(s);
  for (double g : t.grad(x).vec()) EXPECT_EQ(g, 2.0);
}

TEST(Tape, DiamondGraph) {
  // f = sum(relu(x) + 3x); df/dx = 1[x>0] + 3.
  ad::Tape<double> t;
  auto x = t.leaf(TensorD({4}, {-1.0, 2.0, -0.5, 3.0}));
  auto f = ad::sum(t, ad::add(t, ad::relu(t, x), ad::scale_by(t, x, 3.0)));
  t.backward(f);
  EXPECT_EQ(t.grad(x).vec(), (std::vector<double>{3.0, 4.0, 3.0, 4.0}));
}

TEST(Tape, GradShapeMatchesValueShape) {
  Rng rng(4);
  ad::Tape<double> t;
  auto x = t.leaf(randn({1, 2, 5, 5}, rng));
  auto w = t.leaf(randn({3, 2, 3, 3}, rng));
  auto b = t.leaf(randn({3}, rng));
  auto a = t.leaf(randn({5, 5}, rng));
  auto y = ad::conv2d(t, x, w, b, {2, 1});
  auto r = ad::reshape(t, y, {9, 3});
  auto m = ad::matmul(t, ad::reshape(t, x, {10, 5}), a);
  auto f = ad::add(t, ad::sum(t, r), ad::sum(t, m));
  t.backward(f);
  for (auto v : {x, w, b, a}) EXPECT_EQ(t.grad(v).shape(), t.value(v).shape());
}

TEST(Tape, ConstantsReceiveNoGradient) {
  ad::Tape<double> t;
  auto x = t.leaf(TensorD({2}, {1.0, 2.0}));
  auto c = t.constant(TensorD({2}, {5.0, 6.0}));
  t.backward(ad::sum(t, ad::add(t, x, c)));
  EXPECT_FALSE(t.requires_grad(c));
  for (double g : t.grad(c).vec()) EXPECT_EQ(g, 0.0);
}

TEST(Tape, ForwardNonFiniteNamesOp) {
  ad::Tape<double> t;
  auto x = t.leaf(TensorD({1}, {1e300}));
  try {
    ad::scale_by(t, x, 1e300);
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.op(), "scale_by");
  }
}

TEST(Tape, BackwardNonFiniteNamesOp) {
  ad::Tape<double> t;
  auto x = t.leaf(TensorD({1}, {1.0}));
  auto y = ad::sabotage(t, x, std::numeric_limits<double>::infinity());
  try {
    t.backward(ad::sum(t, y));
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.op(), "sabotage");
  }
}

TEST(GradCheck, LinearIsExact) {
  GradFn f = [](ad::Tape<double>& t, std::span<const ad::Var> in) {
    return ad::scale_by(t, in[0], 3.0);
  };
  Rng rng(1);
  EXPECT_LE(grad_check(f, {randn({7}, rng)}), 1e-10);
}

TEST(GradCheck, ConvReluSum) {
  GradFn f = [](ad::Tape<double>& t, std::span<const ad::Var> in) {
    return ad::relu(t, ad::conv2d(t, in[0], in[1], in[2], {1, 1}));
  };
  for (std::uint64_t s = 0; s < 3; ++s) {
    Rng rng(30 + s);
    EXPECT_LT(grad_check(f, {randn({1, 2, 5, 5}, rng), randn({2, 2, 3, 3}, rng), randn({2}, rng)}),
              1e-6);
  }
}

TEST(GradCheck, NonFiniteIntermediateNamesOp) {
  GradFn f = [](ad::Tape<double>& t, std::span<const ad::Var> in) {
    return ad::scale_by(t, ad::scale_by(t, in[0], 1e200), 1e200);
  };
  try {
    grad_check(f, {TensorD({1}, {1.0})});
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.op(), "scale_by");
  }
}

TEST(GradCheck, DetectsWrongBackward) {
  GradFn f = [](ad::Tape<double>& t, std::span<const ad::Var> in) {
    return ad::sabotage(t, ad::sigmoid(t, in[0]), 1.5);
  };
  Rng rng(2);
  EXPECT_GT(grad_check(f, {randn({6}, rng)}), 1e-3);
}

TEST(GradCheck, ReportLocatesWorstElement) {
  // Only input 1 has a wrong gradient path.
  GradFn f = [](ad::Tape<double>& t, std::span<const ad::Var> in) {
    return ad::add(t, in[0], ad::sabotage(t, in[1], 2.0));
  };
  const auto r = grad_check_report(f, {TensorD({2}, {1.0, 2.0}), TensorD({2}, {3.0, 4.0})});
  EXPECT_EQ(r.worst_input, 1u);
  EXPECT_NEAR(r.analytic, 2.0, 1e-12);
  EXPECT_NEAR(r.numeric, 1.0, 1e-9);
}

TEST(GradSuite, DefaultRowsPass) {
  const auto rows = run_grad_suite({});
  EXPECT_EQ(rows.size(), grad_suite_row_names(false).size());
  EXPECT_GE(rows.size(), 8u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.pass) << r.name << " " << r.max_rel_error;
    EXPECT_LT(r.max_rel_error, 1e-6) << r.name;
  }
}

TEST(GradSuite, FullAddsEndToEndRows) {
  const auto def = grad_suite_row_names(false), full = grad_suite_row_names(true);
  EXPECT_GT(full.size(), def.size());
  for (const char* name : {"rgc_forward", "encoder", "head", "loss@model"}) {
    EXPECT_NE(std::find(full.begin(), full.end(), name), full.end()) << name;
  }
}

TEST(GradSuite, SabotagedRowFailsAlone) {
  GradSuiteOptions opt;
  opt.sabotage = "matmul";
  for (const auto& r : run_grad_suite(opt)) {
    EXPECT_EQ(r.pass, r.name != "matmul") << r.name;
  }
}

TEST(Determinism, BackwardIsBitIdentical) {
  auto run = [] {
    Rng rng(77);
    ad::Tape<double> t;
    auto x = t.leaf(randn({2, 3, 6, 6}, rng));
    auto w = t.leaf(randn({4, 3, 3, 3}, rng));
    auto b = t.leaf(randn({4}, rng));
    auto y = ad::bilinear_upsample(t, ad::conv2d(t, x, w, b, {2, 1}), 2);
    t.backward(ad::sum(t, ad::sigmoid(t, y)));
    return std::make_pair(t.grad(x), t.grad(w));
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}
