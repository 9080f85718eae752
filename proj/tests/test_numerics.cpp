#include <doctest.h>

#include <cmath>
#include <numeric>

#include "protocacl/errors.hpp"
#include "protocacl/model/losses.hpp"
#include "protocacl/numerics/gradcheck.hpp"
#include "protocacl/numerics/ops.hpp"
#include "support.hpp"

using namespace protocacl;
using namespace protocacl::num;
using testing::fd_error;
using testing::random_array;

namespace {

Var weighted_sum(Tape& t, Var x, std::uint64_t seed) {
  Rng rng(seed);
  auto w = t.constant(random_array(rng, x.shape()));
  return sum(mul(x, w));
}

NumArray shift_all(NumArray a, double by) {
  for (auto& v : a.values()) v += by;
  return a;
}

}  // namespace

TEST_CASE("NumArray keeps shape and size in agreement") {
  NumArray a(Shape{2, 3}, 1.5);
  CHECK(a.size() == 6);
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 3);
  CHECK(NumArray::scalar(4.0).item() == 4.0);
  CHECK_THROWS_AS(NumArray(Shape{2, 0}), DimensionError);
  CHECK_THROWS_AS(NumArray(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(a.item(), ContractError);
}

TEST_CASE("matmul") {
  Tape t;
  SUBCASE("identity") {
    auto out = matmul(t.constant(NumArray::matrix({{1, 0}, {0, 1}})), t.constant(NumArray::matrix({{1, 2}, {3, 4}})));
    CHECK(out.value() == NumArray::matrix({{1, 2}, {3, 4}}));
  }
  SUBCASE("orthogonal rows") {
    auto out = matmul(t.constant(NumArray::matrix({{1, 0}})), t.constant(NumArray::matrix({{0}, {1}})));
    CHECK(out.value() == NumArray::matrix({{0}}));
  }
  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(t.constant(NumArray(Shape{2, 3})), t.constant(NumArray(Shape{2, 3})));
      FAIL("expected a DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
    }
  }
  SUBCASE("gradient of sum equals ones * b^T") {
    Rng rng(11);
    const auto a = random_array(rng, {3, 4});
    const auto b = random_array(rng, {4, 2});
    const testing::TapeFn f = [](Tape&, const std::vector<Var>& v) { return sum(matmul(v[0], v[1])); };
    const auto g = testing::analytic(f, {a, b});
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 4; ++k) CHECK(g[0].at(i, k) == doctest::Approx(b.at(k, 0) + b.at(k, 1)).epsilon(1e-14));
    CHECK(fd_error(f, {a, b}) <= 1e-6);
  }
}

TEST_CASE("softmax") {
  Tape t;
  auto s = [&](std::vector<double> v) { return softmax(t.constant(NumArray::vector(std::move(v))), 0).value(); };
  CHECK(s({0, 0})[0] == doctest::Approx(0.5).epsilon(1e-15));
  const auto p = s({0, -4});
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))).epsilon(1e-12));
  CHECK(std::abs(p[0] - 0.98201) < 1e-5);
  CHECK(std::abs(p[1] - 0.01799) < 1e-5);
  const auto big = s({1000, 0});
  CHECK(big[0] == 1.0);
  CHECK(std::isfinite(big[1]));
  CHECK(big[1] < 1e-300);
}

TEST_CASE("softmax slices are probability vectors for inputs up to 1e3") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t;
    const auto x = random_array(rng, {4, 7}, 1e3);
    for (std::size_t axis : {0u, 1u}) {
      const auto p = softmax(t.constant(x), axis).value();
      const std::size_t slices = axis == 0 ? 7 : 4, len = axis == 0 ? 4 : 7;
      for (std::size_t s = 0; s < slices; ++s) {
        double total = 0.0;
        for (std::size_t e = 0; e < len; ++e) {
          const double v = axis == 0 ? p.at(e, s) : p.at(s, e);
          CHECK(v >= 0.0);
          CHECK(std::isfinite(v));
          total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("elementwise, unary and reductions") {
  Tape t;
  CHECK(tanh(t.constant(NumArray::vector({0}))).value()[0] == 0.0);
  auto odd = sum(tanh(mul(t.constant(NumArray::vector({1, -1})), t.constant(NumArray::vector({1, 1})))));
  CHECK(odd.value().item() == 0.0);
  auto m = mean(t.constant(NumArray::matrix({{1, 3}, {5, 7}})), 0).value();
  CHECK(m == NumArray::vector({3, 5}));
  CHECK(sum(t.constant(NumArray::matrix({{1, 3}, {5, 7}})), 1).value() == NumArray::vector({4, 12}));
  CHECK_THROWS_AS(log(t.constant(NumArray::vector({1, 0}))), DomainError);
  CHECK_THROWS_AS(log(t.constant(NumArray::vector({-1}))), DomainError);
  CHECK_THROWS_AS(add(t.constant(NumArray(Shape{2, 3})), t.constant(NumArray(Shape{3, 2}))), DimensionError);
  SUBCASE("row and column broadcasting") {
    auto x = t.constant(NumArray::matrix({{1, 2}, {3, 4}}));
    CHECK(add(x, t.constant(NumArray::vector({10, 20}))).value() == NumArray::matrix({{11, 22}, {13, 24}}));
    CHECK(mul(x, t.constant(NumArray::matrix({{2}, {3}}))).value() == NumArray::matrix({{2, 4}, {9, 12}}));
    CHECK(sub(x, t.constant(NumArray::scalar(1))).value() == NumArray::matrix({{0, 1}, {2, 3}}));
  }
}

TEST_CASE("l2_normalize") {
  Tape t;
  const auto v = l2_normalize(t.constant(NumArray::vector({3, 4}))).value();
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(l2_normalize(t.constant(NumArray::vector({0, 1e-15}))), DomainError);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto u = l2_normalize(t.constant(random_array(rng, {9}))).value();
    double sq = 0.0;
    for (double x : u.values()) sq += x * x;
    CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-9);
  }
}

TEST_CASE("sq_euclidean") {
  Tape t;
  auto a = t.constant(NumArray::vector({0, 0}));
  CHECK(sq_euclidean(a, a).value().item() == 0.0);
  CHECK(sq_euclidean(a, t.constant(NumArray::vector({2, 0}))).value().item() == 4.0);
  CHECK_THROWS_AS(sq_euclidean(a, t.constant(NumArray::vector({1, 2, 3}))), DimensionError);
  Rng rng(8);
  const auto x = random_array(rng, {5});
  const auto y = random_array(rng, {5});
  const testing::TapeFn f = [](Tape&, const std::vector<Var>& v) { return sq_euclidean(v[0], v[1]); };
  const auto g = testing::analytic(f, {x, y});
  for (std::size_t i = 0; i < 5; ++i) CHECK(g[0][i] == doctest::Approx(2.0 * (x[i] - y[i])).epsilon(1e-14));
  CHECK(fd_error(f, {x, y}) <= 1e-6);
}

TEST_CASE("backward") {
  SUBCASE("x squared") {
    Tape t;
    auto x = t.leaf(NumArray::scalar(3.0));
    CHECK(t.backward(square(x)).of(x).item() == 6.0);
  }
  SUBCASE("sum of softmax is constant") {
    Tape t;
    auto x = t.leaf(NumArray::vector({0.3, -1.2, 2.0}));
    const auto g = t.backward(sum(softmax(x, 0))).of(x);
    for (double v : g.values()) CHECK(std::abs(v) < 1e-15);
  }
  SUBCASE("non-scalar loss is a contract error") {
    Tape t;
    auto x = t.leaf(NumArray::vector({1, 2}));
    CHECK_THROWS_AS(t.backward(square(x)), ContractError);
  }
  SUBCASE("each node's rule runs once even when reused") {
    Tape t;
    auto x = t.leaf(NumArray::vector({1, 2}));
    int calls = 0;
    auto y = t.record(x.value(), {x.id()}, [&](const Tape&, const NumArray& g, std::span<NumArray* const> gin) {
      ++calls;
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
    });
    auto loss = sum(add(mul(y, y), y));
    const auto g = t.backward(loss).of(x);
    CHECK(calls == 1);
    CHECK(g == NumArray::vector({3, 5}));
  }
  SUBCASE("constants receive no gradient") {
    Tape t;
    auto c = t.constant(NumArray::vector({1, 2}));
    auto x = t.leaf(NumArray::vector({3, 4}));
    const auto grads = t.backward(sum(mul(c, x)));
    CHECK(grads.find(c) == nullptr);
    CHECK(grads.of(x) == NumArray::vector({1, 2}));
  }
}

TEST_CASE("every differentiable operation agrees with central differences") {
  Rng rng(2024);
  struct Case {
    const char* name;
    std::vector<NumArray> inputs;
    std::function<Var(Tape&, const std::vector<Var>&)> op;
  };
  const std::size_t seg[] = {2, 3};
  const std::size_t idx[] = {2, 0, 2};
  std::vector<Case> cases = {
      {"add", {random_array(rng, {3, 4}, 0.1), random_array(rng, {4}, 0.1)}, [](Tape&, auto& v) { return add(v[0], v[1]); }},
      {"sub", {random_array(rng, {3, 4}, 0.1), random_array(rng, {3, 1}, 0.1)}, [](Tape&, auto& v) { return sub(v[0], v[1]); }},
      {"mul", {random_array(rng, {3, 4}, 0.1), random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return mul(v[0], v[1]); }},
      {"div", {random_array(rng, {3, 4}, 0.1), NumArray(Shape{4}, 0.7)}, [](Tape&, auto& v) { return div(v[0], v[1]); }},
      {"tanh", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return tanh(v[0]); }},
      {"exp", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return exp(v[0]); }},
      {"log", {shift_all(random_array(rng, {3, 4}, 0.1), 0.5)}, [](Tape&, auto& v) { return log(v[0]); }},
      {"neg", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return neg(v[0]); }},
      {"square", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return square(v[0]); }},
      {"relu", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return relu(v[0]); }},
      {"sigmoid", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return sigmoid(v[0]); }},
      {"sum axis 0", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return sum(v[0], 0); }},
      {"mean axis 1", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return mean(v[0], 1); }},
      {"matmul", {random_array(rng, {3, 4}, 0.1), random_array(rng, {4, 2}, 0.1)}, [](Tape&, auto& v) { return matmul(v[0], v[1]); }},
      {"transpose", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return transpose(v[0]); }},
      {"softmax axis 1", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return softmax(v[0], 1); }},
      {"log_softmax axis 0", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return log_softmax(v[0], 0); }},
      {"l2_normalize rows", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return l2_normalize(v[0]); }},
      {"dot", {random_array(rng, {5}, 0.1), random_array(rng, {5}, 0.1)}, [](Tape&, auto& v) { return dot(v[0], v[1]); }},
      {"pairwise_sq_dist", {random_array(rng, {3, 4}, 0.1), random_array(rng, {2, 4}, 0.1)}, [](Tape&, auto& v) { return pairwise_sq_dist(v[0], v[1]); }},
      {"pairwise_sq_dist self", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return pairwise_sq_dist(v[0], v[0]); }},
      {"gather_rows", {random_array(rng, {3, 4}, 0.1)}, [&](Tape&, auto& v) { return gather_rows(v[0], idx); }},
      {"take", {random_array(rng, {3, 4}, 0.1)}, [&](Tape&, auto& v) { return take(v[0], idx); }},
      {"concat_cols", {random_array(rng, {2, 4}, 0.1), random_array(rng, {2, 3}, 0.1)}, [](Tape&, auto& v) {
         const Var parts[] = {v[0], v[1]};
         return concat_cols(parts);
       }},
      {"concat_rows", {random_array(rng, {2, 4}, 0.1), random_array(rng, {1, 4}, 0.1)}, [](Tape&, auto& v) {
         const Var parts[] = {v[0], v[1], v[0]};
         return concat_rows(parts);
       }},
      {"unfold_windows", {random_array(rng, {5, 3}, 0.1)}, [&](Tape&, auto& v) { return unfold_windows(v[0], seg, 3); }},
      {"segment_max", {random_array(rng, {5, 3}, 0.1)}, [&](Tape&, auto& v) { return segment_max(v[0], seg); }},
      {"scale and shift", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return shift(scale(v[0], -2.5), 1.0); }},
      {"reshape", {random_array(rng, {3, 4}, 0.1)}, [](Tape&, auto& v) { return reshape(v[0], {2, 6}); }},
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    CAPTURE(c.name);
    const testing::TapeFn f = [&, i](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, c.op(t, v), 100 + i); };
    CHECK(fd_error(f, c.inputs) <= 1e-6);
  }
}

TEST_CASE("backward is linear") {
  Rng rng(9);
  const auto x = random_array(rng, {3, 3}, 0.5);
  const double alpha = 0.7, beta = -1.3;
  auto f = [](Var v) { return sum(tanh(matmul(v, v))); };
  auto g = [](Var v) { return sum(exp(scale(v, 0.5))); };
  const testing::TapeFn ff = [&](Tape&, const std::vector<Var>& v) { return f(v[0]); };
  const testing::TapeFn gg = [&](Tape&, const std::vector<Var>& v) { return g(v[0]); };
  const testing::TapeFn both = [&](Tape&, const std::vector<Var>& v) {
    return add(scale(f(v[0]), alpha), scale(g(v[0]), beta));
  };
  const auto a = testing::analytic(ff, {x})[0];
  const auto b = testing::analytic(gg, {x})[0];
  const auto c = testing::analytic(both, {x})[0];
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(c[i] - (alpha * a[i] + beta * b[i])) <= 1e-9);
}

TEST_CASE("identical inputs give bit-identical values and gradients") {
  Rng rng(12);
  const auto x = random_array(rng, {4, 5});
  const testing::TapeFn f = [](Tape&, const std::vector<Var>& v) {
    return sum(log_softmax(matmul(v[0], transpose(v[0])), 1));
  };
  CHECK(testing::value_of(f, {x}) == testing::value_of(f, {x}));
  CHECK(testing::analytic(f, {x})[0] == testing::analytic(f, {x})[0]);
}

TEST_CASE("unfold_windows and segment_max respect segment boundaries") {
  Tape t;
  auto x = t.constant(NumArray::matrix({{1}, {2}, {3}, {4}, {5}}));
  const std::size_t lengths[] = {2, 3};
  const auto w = unfold_windows(x, lengths, 3).value();
  CHECK(w == NumArray::matrix({{0, 1, 2}, {1, 2, 0}, {0, 3, 4}, {3, 4, 5}, {4, 5, 0}}));
  const auto m = segment_max(t.constant(NumArray::matrix({{1, -5}, {0, -1}, {-2, -3}, {7, -9}, {3, -4}})), lengths)
                     .value();
  CHECK(m == NumArray::matrix({{1, -1}, {7, -3}}));
  const std::size_t bad[] = {2, 2};
  CHECK_THROWS_AS(segment_max(x, bad), DimensionError);
}

TEST_CASE("grad_check") {
  SUBCASE("dot(w, w)") {
    Rng rng(4);
    std::vector<NumArray> params{random_array(rng, {6})};
    const ScalarFn f = [](Tape&, std::span<const Var> v) { return dot(v[0], v[0]); };
    const auto r = grad_check(f, params);
    CHECK(r.max_relative_error <= 1e-7);
    CHECK(r.coordinates == 6);
  }
  SUBCASE("constant function") {
    std::vector<NumArray> params{NumArray::vector({1, 2})};
    const ScalarFn f = [](Tape& t, std::span<const Var>) { return t.constant(NumArray::scalar(3.0)); };
    const auto r = grad_check(f, params);
    CHECK(r.max_relative_error == 0.0);
    CHECK(r.worst_analytic == 0.0);
    CHECK(r.worst_numeric == 0.0);
  }
  SUBCASE("contrastive loss on random two-class embeddings") {
    Rng rng(6);
    std::vector<NumArray> params{random_array(rng, {6, 4})};
    const std::size_t labels[] = {0, 0, 0, 1, 1, 1};
    const ScalarFn f = [&](Tape&, std::span<const Var> v) { return model::contrastive_loss(v[0], labels).value; };
    CHECK(grad_check(f, params).max_relative_error <= 1e-4);
  }
  SUBCASE("parameters are restored") {
    Rng rng(7);
    std::vector<NumArray> params{random_array(rng, {3, 3})};
    const auto before = params;
    const ScalarFn f = [](Tape&, std::span<const Var> v) { return sum(square(v[0])); };
    grad_check(f, params);
    CHECK(params == before);
  }
}

TEST_CASE("relu and segment_max propagate NaN") {
  Tape t;
  const double nan = std::nan("");
  const auto r = relu(t.constant(NumArray({3}, {nan, -1.0, 2.0}))).value();
  CHECK(std::isnan(r[0]));
  CHECK(r[1] == 0.0);
  const std::size_t lengths[] = {3};
  const auto m = segment_max(t.constant(NumArray::matrix({{1, 4}, {nan, 2}, {0, 3}})), lengths).value();
  CHECK(std::isnan(m[0]));
  CHECK(m[1] == 4.0);
}
