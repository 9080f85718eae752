#include "protocacl/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace protocacl::num {

namespace {

std::vector<Var> bind(Tape& tape, const std::vector<NumArray>& params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.borrow(p));
  return vars;
}

}  // namespace

double evaluate_scalar(const ScalarFn& f, const std::vector<NumArray>& params) {
  Tape tape;
  const auto vars = bind(tape, params);
  return f(tape, vars).value().item();
}

std::vector<NumArray> analytic_gradient(const ScalarFn& f, const std::vector<NumArray>& params) {
  Tape tape;
  const auto vars = bind(tape, params);
  const auto loss = f(tape, vars);
  const auto grads = tape.backward(loss);
  std::vector<NumArray> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(grads.of(v));
  return out;
}

GradCheckResult grad_check(const ScalarFn& f, std::vector<NumArray>& params, double eps) {
  const auto analytic = analytic_gradient(f, params);
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + eps;
      const double up = evaluate_scalar(f, params);
      params[p][i] = saved - eps;
      const double down = evaluate_scalar(f, params);
      params[p][i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p][i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++result.coordinates;
      if (err > result.max_relative_error || result.coordinates == 1) {
        result.max_relative_error = err;
        result.worst_param = p;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace protocacl::num
