#pragma once

// f64 finite-difference suite over every differentiable op, plus end-to-end
// rows (rgc_forward, encoder, head, loss@model) in full mode.

#include <cstdint>
#include <string>
#include <vector>

namespace rgcseg {

struct GradSuiteOptions {
  bool full = false;
  double eps = 1e-5;
  double tolerance = 1e-6;
  std::uint64_t seed = 20240917;
  std::size_t seeds_per_row = 3;
  // Test fixture: scales the gradient flowing through the named row's output
  // by 1.5 so the row must fail.
  std::string sabotage;
};

struct GradSuiteRow {
  std::string name;
  double max_rel_error = 0.0;  // worst over all seeds
  double seconds = 0.0;
  bool pass = false;
};

std::vector<std::string> grad_suite_row_names(bool full);
std::vector<GradSuiteRow> run_grad_suite(const GradSuiteOptions& opt);

}  // namespace rgcseg
