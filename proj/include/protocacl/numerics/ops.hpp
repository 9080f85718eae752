#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "protocacl/numerics/tape.hpp"

namespace protocacl::num {

enum class BinaryKind { add, sub, mul, div };
enum class UnaryKind { tanh, exp, log, neg, square, relu, sigmoid };
enum class ReduceKind { sum, mean };

// Binary ops broadcast rank<=2 operands numpy-style (extent 1 stretches).
Var elementwise(Var a, Var b, BinaryKind kind);
Var unary(Var a, UnaryKind kind);
// No axis reduces to a scalar.
Var reduce(Var a, std::optional<std::size_t> axis, ReduceKind kind);

inline Var add(Var a, Var b) { return elementwise(a, b, BinaryKind::add); }
inline Var sub(Var a, Var b) { return elementwise(a, b, BinaryKind::sub); }
inline Var mul(Var a, Var b) { return elementwise(a, b, BinaryKind::mul); }
inline Var div(Var a, Var b) { return elementwise(a, b, BinaryKind::div); }
inline Var tanh(Var a) { return unary(a, UnaryKind::tanh); }
inline Var exp(Var a) { return unary(a, UnaryKind::exp); }
inline Var log(Var a) { return unary(a, UnaryKind::log); }
inline Var neg(Var a) { return unary(a, UnaryKind::neg); }
inline Var square(Var a) { return unary(a, UnaryKind::square); }
inline Var relu(Var a) { return unary(a, UnaryKind::relu); }
inline Var sigmoid(Var a) { return unary(a, UnaryKind::sigmoid); }
inline Var sum(Var a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(a, axis, ReduceKind::sum);
}
inline Var mean(Var a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(a, axis, ReduceKind::mean);
}

Var scale(Var a, double factor);
Var shift(Var a, double offset);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);

// Stable (max-subtracted) softmax along `axis`.
Var softmax(Var a, std::size_t axis);
Var log_softmax(Var a, std::size_t axis);

// Unit-norm vector, or unit-norm rows of a matrix. Throws DomainError below norm 1e-12.
Var l2_normalize(Var a);
inline constexpr double kNormTolerance = 1e-12;

Var dot(Var a, Var b);
// Sum of squared differences of two equal-length vectors.
Var sq_euclidean(Var a, Var b);
// out[i, j] = ||a_i - b_j||^2 for rows of a [m x h] and b [n x h].
Var pairwise_sq_dist(Var a, Var b);

// Rows of a matrix (or elements of a vector) selected by index; repeats allowed.
Var gather_rows(Var a, std::span<const std::size_t> indices);
// Elements of the flattened array.
Var take(Var a, std::span<const std::size_t> flat_indices);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

// Stacked sequences X [T x D] split into consecutive segments of the given
// lengths. Row t of the result is the concatenation of the `window` rows
// centred on t, with zeros outside the segment.
Var unfold_windows(Var x, std::span<const std::size_t> lengths, std::size_t window);
// Column-wise max over each segment of rows: [T x H] -> [segments x H].
Var segment_max(Var x, std::span<const std::size_t> lengths);

}  // namespace protocacl::num
