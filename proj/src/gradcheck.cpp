#include "rgcseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rgcseg {
namespace {

double evaluate(const GradFn& fn, const std::vector<TensorD>& inputs) {
  ad::Tape<double> tape;
  std::vector<ad::Var> vars;
  vars.reserve(inputs.size());
  for (const auto& x : inputs) vars.push_back(tape.constant(x));
  const ad::Var out = fn(tape, vars);
  return ops::sum(tape.value(out));
}

}  // namespace

GradCheckReport grad_check_report(const GradFn& fn, const std::vector<TensorD>& inputs,
                                  double eps) {
  ad::Tape<double> tape;
  std::vector<ad::Var> vars;
  vars.reserve(inputs.size());
  for (const auto& x : inputs) vars.push_back(tape.leaf(x));
  const ad::Var out = ad::sum(tape, fn(tape, vars));
  tape.backward(out);

  GradCheckReport report;
  std::vector<TensorD> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const TensorD analytic = tape.grad(vars[i]);
    for (std::size_t e = 0; e < inputs[i].numel(); ++e) {
      const double x0 = inputs[i][e];
      probe[i][e] = x0 + eps;
      const double fp = evaluate(fn, probe);
      probe[i][e] = x0 - eps;
      const double fm = evaluate(fn, probe);
      probe[i][e] = x0;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[e];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (!std::isfinite(err)) throw NonFiniteError("grad_check", "finite difference");
      if (err > report.max_rel_error) {
        report = {err, i, e, a, numeric};
      }
    }
  }
  return report;
}

}  // namespace rgcseg
