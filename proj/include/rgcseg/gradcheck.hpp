#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rgcseg/autodiff.hpp"

namespace rgcseg {

// Builds the function under test on a fresh tape from the given input leaves.
// The output is sum-reduced before differentiation.
using GradFn = std::function<ad::Var(ad::Tape<double>&, std::span<const ad::Var>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central-difference check of every element of every input:
// max |analytic - numeric| / max(1, |analytic|, |numeric|).
// A NaN/Inf anywhere surfaces as NonFiniteError naming the op.
GradCheckReport grad_check_report(const GradFn& fn, const std::vector<TensorD>& inputs,
                                  double eps = 1e-5);

inline double grad_check(const GradFn& fn, const std::vector<TensorD>& inputs,
                         double eps = 1e-5) {
  return grad_check_report(fn, inputs, eps).max_rel_error;
}

}  // namespace rgcseg
