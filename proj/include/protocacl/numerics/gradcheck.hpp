#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "protocacl/numerics/tape.hpp"

namespace protocacl::num {

// Builds a scalar loss on `tape` from the parameter leaves (one per entry of
// the parameter list, same order).
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Central differences over every coordinate of every parameter:
// max |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// `params` is perturbed in place and restored before returning.
GradCheckResult grad_check(const ScalarFn& f, std::vector<NumArray>& params, double eps = 1e-5);

// Analytic gradient of f at params, one array per parameter.
std::vector<NumArray> analytic_gradient(const ScalarFn& f, const std::vector<NumArray>& params);
double evaluate_scalar(const ScalarFn& f, const std::vector<NumArray>& params);

}  // namespace protocacl::num
