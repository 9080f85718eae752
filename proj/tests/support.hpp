#pragma once

// Test-side oracles. Nothing here calls into the library's own gradient
// checker, so the two can disagree.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "protocacl/data/indexing.hpp"
#include "protocacl/numerics/array.hpp"
#include "protocacl/numerics/tape.hpp"
#include "protocacl/random.hpp"

namespace testing {

using protocacl::num::NumArray;
using protocacl::num::Shape;
using protocacl::num::Tape;
using protocacl::num::Var;

using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double value_of(const TapeFn& f, const std::vector<NumArray>& xs) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& x : xs) vars.push_back(tape.leaf(x));
  return f(tape, vars).value().item();
}

inline std::vector<NumArray> analytic(const TapeFn& f, const std::vector<NumArray>& xs) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& x : xs) vars.push_back(tape.leaf(x));
  const auto grads = tape.backward(f(tape, vars));
  std::vector<NumArray> out;
  for (const auto& v : vars) out.push_back(grads.of(v));
  return out;
}

inline std::vector<NumArray> numeric(const TapeFn& f, std::vector<NumArray> xs, double eps = 1e-5) {
  std::vector<NumArray> out;
  for (std::size_t p = 0; p < xs.size(); ++p) {
    NumArray g(xs[p].shape());
    for (std::size_t i = 0; i < xs[p].size(); ++i) {
      const double keep = xs[p][i];
      xs[p][i] = keep + eps;
      const double up = value_of(f, xs);
      xs[p][i] = keep - eps;
      const double down = value_of(f, xs);
      xs[p][i] = keep;
      g[i] = (up - down) / (2.0 * eps);
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline double max_relative_error(const std::vector<NumArray>& a, const std::vector<NumArray>& b) {
  double worst = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    for (std::size_t i = 0; i < a[p].size(); ++i) {
      const double denom = std::max(1e-8, std::abs(a[p][i]) + std::abs(b[p][i]));
      worst = std::max(worst, std::abs(a[p][i] - b[p][i]) / denom);
    }
  }
  return worst;
}

inline double fd_error(const TapeFn& f, const std::vector<NumArray>& xs, double eps = 1e-5) {
  return max_relative_error(analytic(f, xs), numeric(f, xs, eps));
}

inline NumArray random_array(protocacl::Rng& rng, Shape shape, double scale = 1.0) {
  NumArray a(std::move(shape));
  for (auto& v : a.values()) v = rng.uniform(-scale, scale);
  return a;
}

// Hand-built indexed sample: token ids, head/tail start; positions are
// relative offsets, clipped.
inline protocacl::data::IndexedSample indexed(std::vector<std::size_t> ids, std::size_t head, std::size_t tail,
                                              std::size_t max_len, int clip, std::size_t label = 0) {
  protocacl::data::IndexedSample s;
  s.length = ids.size();
  s.label = label;
  s.token_ids.assign(max_len, 0);
  s.head_rel_pos.assign(max_len, 0);
  s.tail_rel_pos.assign(max_len, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    s.token_ids[i] = ids[i];
    s.head_rel_pos[i] = std::clamp(static_cast<int>(i) - static_cast<int>(head), -clip, clip);
    s.tail_rel_pos[i] = std::clamp(static_cast<int>(i) - static_cast<int>(tail), -clip, clip);
  }
  return s;
}

}  // namespace testing
