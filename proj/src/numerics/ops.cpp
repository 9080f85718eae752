#include "protocacl/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>

#include <cblas.h>

#include "protocacl/errors.hpp"

namespace protocacl::num {

namespace {

struct Extents {
  std::size_t rows;
  std::size_t cols;
};

Extents extents_of(const NumArray& a) {
  if (a.rank() > 2) throw DimensionError("rank > 2 unsupported: " + shape_string(a.shape()));
  return {a.rows(), a.cols()};
}

std::size_t stretch(std::size_t x, std::size_t y, const NumArray& a, const NumArray& b) {
  if (x == y || y == 1) return x;
  if (x == 1) return y;
  throw DimensionError("cannot broadcast " + shape_string(a.shape()) + " with " +
                       shape_string(b.shape()));
}

// c += op(a) * op(b) with op(a) [m x k] and op(b) [k x n], all row-major.
// BLAS runs single-threaded so results do not depend on the thread count.
void gemm_acc(const double* a, bool trans_a, const double* b, bool trans_b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
  static std::once_flag single_thread;
  std::call_once(single_thread, [] { openblas_set_num_threads(1); });
  const auto M = static_cast<blasint>(m), K = static_cast<blasint>(k), N = static_cast<blasint>(n);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, M, N, K,
              1.0, a, trans_a ? M : K, b, trans_b ? K : N, 1.0, c, N);
}

std::vector<double> transposed(const NumArray& a) {
  const auto r = a.rows(), c = a.cols();
  std::vector<double> t(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return t;
}

// Slices of an array along an axis: `count` slices of `length` elements,
// element e of slice s at offset start(s) + e * stride.
struct Slices {
  std::size_t count;
  std::size_t length;
  std::size_t stride;
  std::size_t outer_step;  // start(s) = (s / inner) * outer_step + (s % inner)
  std::size_t inner;
  std::size_t start(std::size_t s) const { return (s / inner) * outer_step + (s % inner); }
};

Slices slices_along(const NumArray& a, std::size_t axis) {
  if (a.rank() == 0) {
    if (axis != 0) throw DimensionError("axis out of range for scalar");
    return {1, 1, 1, 1, 1};
  }
  if (axis >= a.rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(a.shape()));
  }
  if (a.rank() == 1) return {1, a.size(), 1, a.size(), 1};
  if (a.rank() > 2) throw DimensionError("rank > 2 unsupported: " + shape_string(a.shape()));
  const auto r = a.shape()[0], c = a.shape()[1];
  if (axis == 1) return {r, c, 1, c, 1};
  return {c, r, c, 0, c};
}

void check_same_size(const NumArray& a, const NumArray& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": length mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

std::size_t checked_total(std::span<const std::size_t> lengths, std::size_t rows, const char* op) {
  std::size_t total = 0;
  for (auto l : lengths) {
    if (l == 0) throw ContractError(std::string(op) + ": empty segment");
    total += l;
  }
  if (total != rows) {
    throw DimensionError(std::string(op) + ": segment lengths sum to " + std::to_string(total) +
                         " but input has " + std::to_string(rows) + " rows");
  }
  return total;
}

}  // namespace

Var elementwise(Var a, Var b, BinaryKind kind) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto ea = extents_of(av), eb = extents_of(bv);
  const auto R = stretch(ea.rows, eb.rows, av, bv);
  const auto C = stretch(ea.cols, eb.cols, av, bv);
  Shape out_shape;
  const auto rank = std::max(av.rank(), bv.rank());
  if (rank == 2) out_shape = {R, C};
  else if (rank == 1) out_shape = {C};

  NumArray out(out_shape);
  auto ia = [ea](std::size_t i, std::size_t j) {
    return (ea.rows == 1 ? 0 : i) * ea.cols + (ea.cols == 1 ? 0 : j);
  };
  auto ib = [eb](std::size_t i, std::size_t j) {
    return (eb.rows == 1 ? 0 : i) * eb.cols + (eb.cols == 1 ? 0 : j);
  };
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double x = av[ia(i, j)], y = bv[ib(i, j)];
      double& o = out[i * C + j];
      switch (kind) {
        case BinaryKind::add: o = x + y; break;
        case BinaryKind::sub: o = x - y; break;
        case BinaryKind::mul: o = x * y; break;
        case BinaryKind::div:
          if (y == 0.0) throw DomainError("division by zero");
          o = x / y;
          break;
      }
    }
  }
  const auto ida = a.id(), idb = b.id();
  return a.tape().record(std::move(out), {ida, idb},
                         [=](const Tape& t, const NumArray& g, std::span<NumArray* const> gin) {
                           const auto& x = t.value(ida);
                           const auto& y = t.value(idb);
                           for (std::size_t i = 0; i < R; ++i) {
                             for (std::size_t j = 0; j < C; ++j) {
                               const double go = g[i * C + j];
                               const double xv = x[ia(i, j)], yv = y[ib(i, j)];
                               double dx = 0.0, dy = 0.0;
                               switch (kind) {
                                 case BinaryKind::add: dx = go; dy = go; break;
                                 case BinaryKind::sub: dx = go; dy = -go; break;
                                 case BinaryKind::mul: dx = go * yv; dy = go * xv; break;
                                 case BinaryKind::div:
                                   dx = go / yv;
                                   dy = -go * xv / (yv * yv);
                                   break;
                               }
                               if (gin[0]) (*gin[0])[ia(i, j)] += dx;
                               if (gin[1]) (*gin[1])[ib(i, j)] += dy;
                             }
                           }
                         });
}

Var unary(Var a, UnaryKind kind) {
  const auto& av = a.value();
  NumArray out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double x = av[i];
    switch (kind) {
      case UnaryKind::tanh: out[i] = std::tanh(x); break;
      case UnaryKind::exp: out[i] = std::exp(x); break;
      case UnaryKind::log:
        if (!(x > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x));
        out[i] = std::log(x);
        break;
      case UnaryKind::neg: out[i] = -x; break;
      case UnaryKind::square: out[i] = x * x; break;
      case UnaryKind::relu: out[i] = x > 0.0 || std::isnan(x) ? x : 0.0; break;
      case UnaryKind::sigmoid:
        out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        break;
    }
  }
  const auto ida = a.id();
  auto& tape = a.tape();
  const auto idy = tape.size();  // id the output is about to receive
  return tape.record(std::move(out), {ida},
                     [=](const Tape& t, const NumArray& g, std::span<NumArray* const> gin) {
                       auto& gx = *gin[0];
                       const auto& x = t.value(ida);
                       const auto& y = t.value(idy);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         double d = 0.0;
                         switch (kind) {
                           case UnaryKind::tanh: d = 1.0 - y[i] * y[i]; break;
                           case UnaryKind::exp: d = y[i]; break;
                           case UnaryKind::log: d = 1.0 / x[i]; break;
                           case UnaryKind::neg: d = -1.0; break;
                           case UnaryKind::square: d = 2.0 * x[i]; break;
                           case UnaryKind::relu: d = x[i] > 0.0 ? 1.0 : 0.0; break;
                           case UnaryKind::sigmoid: d = y[i] * (1.0 - y[i]); break;
                         }
                         gx[i] += g[i] * d;
                       }
                     });
}

Var reduce(Var a, std::optional<std::size_t> axis, ReduceKind kind) {
  const auto& av = a.value();
  const auto ida = a.id();
  if (!axis) {
    const double n = static_cast<double>(av.size());
    double s = 0.0;
    for (double x : av.values()) s += x;
    const double factor = kind == ReduceKind::mean ? 1.0 / n : 1.0;
    return a.tape().record(NumArray::scalar(s * factor), {ida},
                           [factor](const Tape&, const NumArray& g, std::span<NumArray* const> gin) {
                             const double d = g[0] * factor;
                             for (auto& v : gin[0]->values()) v += d;
                           });
  }
  const auto sl = slices_along(av, *axis);
  Shape out_shape;
  if (av.rank() == 2) out_shape = {sl.count};
  NumArray out(out_shape);
  const double factor = kind == ReduceKind::mean ? 1.0 / static_cast<double>(sl.length) : 1.0;
  for (std::size_t s = 0; s < sl.count; ++s) {
    double acc = 0.0;
    const auto st = sl.start(s);
    for (std::size_t e = 0; e < sl.length; ++e) acc += av[st + e * sl.stride];
    out[s] = acc * factor;
  }
  return a.tape().record(std::move(out), {ida},
                         [sl, factor](const Tape&, const NumArray& g, std::span<NumArray* const> gin) {
                           auto& gx = *gin[0];
                           for (std::size_t s = 0; s < sl.count; ++s) {
                             const double d = g[s] * factor;
                             const auto st = sl.start(s);
                             for (std::size_t e = 0; e < sl.length; ++e) gx[st + e * sl.stride] += d;
                           }
                         });
}

Var scale(Var a, double factor) {
  NumArray out = a.value();
  for (auto& v : out.values()) v *= factor;
  return a.tape().record(std::move(out), {a.id()},
                         [factor](const Tape&, const NumArray& g, std::span<NumArray* const> gin) {
                           auto& gx = *gin[0];
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                         });
}

Var shift(Var a, double offset) {
  NumArray out = a.value();
  for (auto& v : out.values()) v += offset;
  return a.tape().record(std::move(out), {a.id()},
                         [](const Tape&, const NumArray& g, std::span<NumArray* const> gin) {
                           auto& gx = *gin[0];
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                         });
}

Var matmul(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() < 1 || av.rank() > 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner extents differ for " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()));
  }
  const auto m = av.rows(), k = av.cols(), n = bv.cols();
  NumArray out(Shape{m, n});
  gemm_acc(av.values().data(), false, bv.values().data(), false, out.values().data(), m, k, n);
  const auto ida = a.id(), idb = b.id();
  return a.tape().record(std::move(out), {ida, idb},
                         [=](const Tape& t, const NumArray& g, std::span<NumArray* const> gin) {
                           const auto& x = t.value(ida);
                           const auto& y = t.value(idb);
                           // dA = G B^T, dB = A^T G
                           if (gin[0]) gemm_acc(g.values().data(), false, y.values().data(), true,
                                                gin[0]->values().data(), m, n, k);
                           if (gin[1]) gemm_acc(x.values().data(), true, g.values().data(), false,
                                                gin[1]->values().data(), k, m, n);
                         });
}

Var transpose(Var a) {
  const auto& av = a.value();
  extents_of(av);
  const auto r = av.rows(), c = av.cols();
  NumArray out(Shape{c, r}, transposed(av));
  return a.tape().record(std::move(out), {a.id()},
                         [r, c](const Tape&, const NumArray& g, std::span<NumArray* const> gin) {
                           auto& gx = *gin[0];
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
                         });
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  return a.tape().record(a.value().reshaped(std::move(shape)), {a.id()},
                         [](const Tape&, const NumArray& g, std::span<NumArray* const> gin) {
                           auto& gx = *gin[0];
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                         });
}

Var softmax(Var a, std::size_t axis) {
  const auto& av = a.value();
  const auto sl = slices_along(av, axis);
  NumArray out(av.shape());
  for (std::size_t s = 0; s < sl.count; ++s) {
    const auto st = sl.start(s);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < sl.length; ++e) mx = std::max(mx, av[st + e * sl.stride]);
    double z = 0.0;
    for (std::size_t e = 0; e < sl.length; ++e) {
      const double v = std::exp(av[st + e * sl.stride] - mx);
      out[st + e * sl.stride] = v;
      z += v;
    }
    for (std::size_t e = 0; e < sl.length; ++e) out[st + e * sl.stride] /= z;
  }
  auto& tape = a.tape();
  const auto idy = tape.size();
  return tape.record(std::move(out), {a.id()},
                     [sl, idy](const Tape& t, const NumArray& g, std::span<NumArray* const> gin) {
                       const auto& y = t.value(idy);
                       auto& gx = *gin[0];
                       for (std::size_t s = 0; s < sl.count; ++s) {
                         const auto st = sl.start(s);
                         double dotgy = 0.0;
                         for (std::size_t e = 0; e < sl.length; ++e) {
                           const auto i = st + e * sl.stride;
                           dotgy += g[i] * y[i];
                         }
                         for (std::size_t e = 0; e < sl.length; ++e) {
                           const auto i = st + e * sl.stride;
                           gx[i] += y[i] * (g[i] - dotgy);
                         }
                       }
                     });
}

Var log_softmax(Var a, std::size_t axis) {
  const auto& av = a.value();
  const auto sl = slices_along(av, axis);
  NumArray out(av.shape());
  for (std::size_t s = 0; s < sl.count; ++s) {
    const auto st = sl.start(s);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < sl.length; ++e) mx = std::max(mx, av[st + e * sl.stride]);
    double z = 0.0;
    for (std::size_t e = 0; e < sl.length; ++e) z += std::exp(av[st + e * sl.stride] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t e = 0; e < sl.length; ++e) out[st + e * sl.stride] = av[st + e * sl.stride] - lz;
  }
  auto& tape = a.tape();
  const auto idy = tape.size();
  return tape.record(std::move(out), {a.id()},
                     [sl, idy](const Tape& t, const NumArray& g, std::span<NumArray* const> gin) {
                       const auto& y = t.value(idy);
                       auto& gx = *gin[0];
                       for (std::size_t s = 0; s < sl.count; ++s) {
                         const auto st = sl.start(s);
                         double gsum = 0.0;
                         for (std::size_t e = 0; e < sl.length; ++e) gsum += g[st + e * sl.stride];
                         for (std::size_t e = 0; e < sl.length; ++e) {
                           const auto i = st + e * sl.stride;
                           gx[i] += g[i] - std::exp(y[i]) * gsum;
                         }
                       }
                     });
}

Var l2_normalize(Var a) {
  const auto& av = a.value();
  if (av.rank() == 0 || av.rank() > 2) {
    throw DimensionError("l2_normalize expects a vector or matrix, got " + shape_string(av.shape()));
  }
  const auto r = av.rows(), c = av.cols();
  NumArray out(av.shape());
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += av[i * c + j] * av[i * c + j];
    const double n = std::sqrt(s);
    if (n <= kNormTolerance) {  // NaN passes through to the caller
      throw DomainError("l2_normalize: degenerate vector (norm " + std::to_string(n) + ") at row " +
                        std::to_string(i));
    }
    norms[i] = n;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] / n;
  }
  auto& tape = a.tape();
  const auto idy = tape.size();
  return tape.record(std::move(out), {a.id()},
                     [r, c, idy, norms = std::move(norms)](const Tape& t, const NumArray& g,
                                                           std::span<NumArray* const> gin) {
                       const auto& y = t.value(idy);
                       auto& gx = *gin[0];
                       for (std::size_t i = 0; i < r; ++i) {
                         double yg = 0.0;
                         for (std::size_t j = 0; j < c; ++j) yg += y[i * c + j] * g[i * c + j];
                         for (std::size_t j = 0; j < c; ++j) {
                           gx[i * c + j] += (g[i * c + j] - y[i * c + j] * yg) / norms[i];
                         }
                       }
                     });
}

Var dot(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  check_same_size(av, bv, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  const auto ida = a.id(), idb = b.id();
  return a.tape().record(NumArray::scalar(s), {ida, idb},
                         [=](const Tape& t, const NumArray& g, std::span<NumArray* const> gin) {
                           const auto& x = t.value(ida);
                           const auto& y = t.value(idb);
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             if (gin[0]) (*gin[0])[i] += g[0] * y[i];
                             if (gin[1]) (*gin[1])[i] += g[0] * x[i];
                           }
                         });
}

Var sq_euclidean(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  check_same_size(av, bv, "sq_euclidean");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  const auto ida = a.id(), idb = b.id();
  return a.tape().record(NumArray::scalar(s), {ida, idb},
                         [=](const Tape& t, const NumArray& g, std::span<NumArray* const> gin) {
                           const auto& x = t.value(ida);
                           const auto& y = t.value(idb);
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             const double d = 2.0 * (x[i] - y[i]) * g[0];
                             if (gin[0]) (*gin[0])[i] += d;
                             if (gin[1]) (*gin[1])[i] -= d;
                           }
                         });
}

Var pairwise_sq_dist(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto ea = extents_of(av), eb = extents_of(bv);
  if (ea.cols != eb.cols) {
    throw DimensionError("pairwise_sq_dist: row widths differ for " + shape_string(av.shape()) +
                         " and " + shape_string(bv.shape()));
  }
  const auto m = ea.rows, n = eb.rows, h = ea.cols;
  NumArray out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        const double d = av[i * h + k] - bv[j * h + k];
        s += d * d;
      }
      out[i * n + j] = s;
    }
  }
  const auto ida = a.id(), idb = b.id();
  return a.tape().record(std::move(out), {ida, idb},
                         [=](const Tape& t, const NumArray& g, std::span<NumArray* const> gin) {
                           const auto& x = t.value(ida);
                           const auto& y = t.value(idb);
                           for (std::size_t i = 0; i < m; ++i) {
                             for (std::size_t j = 0; j < n; ++j) {
                               const double go = 2.0 * g[i * n + j];
                               if (go == 0.0) continue;
                               for (std::size_t k = 0; k < h; ++k) {
                                 const double d = go * (x[i * h + k] - y[j * h + k]);
                                 if (gin[0]) (*gin[0])[i * h + k] += d;
                                 if (gin[1]) (*gin[1])[j * h + k] -= d;
                               }
                             }
                           }
                         });
}

Var gather_rows(Var a, std::span<const std::size_t> indices) {
  const auto& av = a.value();
  extents_of(av);
  if (indices.empty()) throw ContractError("gather_rows: no indices");
  const bool vec = av.rank() <= 1;
  const auto width = vec ? 1 : av.cols();
  const auto limit = vec ? av.size() : av.rows();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  NumArray out(vec ? Shape{idx.size()} : Shape{idx.size(), width});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= limit) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[r]) + " out of range for " +
                           shape_string(av.shape()));
    }
    std::copy_n(av.values().begin() + static_cast<std::ptrdiff_t>(idx[r] * width), width,
                out.values().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return a.tape().record(std::move(out), {a.id()},
                         [width, idx = std::move(idx)](const Tape&, const NumArray& g,
                                                       std::span<NumArray* const> gin) {
                           auto& gx = *gin[0];
                           for (std::size_t r = 0; r < idx.size(); ++r) {
                             for (std::size_t k = 0; k < width; ++k) gx[idx[r] * width + k] += g[r * width + k];
                           }
                         });
}

Var take(Var a, std::span<const std::size_t> flat_indices) {
  const auto& av = a.value();
  if (flat_indices.empty()) throw ContractError("take: no indices");
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  NumArray out(Shape{idx.size()});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= av.size()) {
      throw DimensionError("take: index " + std::to_string(idx[r]) + " out of range for " +
                           shape_string(av.shape()));
    }
    out[r] = av[idx[r]];
  }
  return a.tape().record(std::move(out), {a.id()},
                         [idx = std::move(idx)](const Tape&, const NumArray& g,
                                                std::span<NumArray* const> gin) {
                           auto& gx = *gin[0];
                           for (std::size_t r = 0; r < idx.size(); ++r) gx[idx[r]] += g[r];
                         });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  auto& tape = parts[0].tape();
  const auto c = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const auto& v = p.value();
    extents_of(v);
    if (v.cols() != c) {
      throw DimensionError("concat_rows: width " + shape_string(v.shape()) + " vs " +
                           std::to_string(c));
    }
    offsets.push_back(rows * c);
    rows += v.rows();
    ids.push_back(p.id());
  }
  NumArray out(Shape{rows, c});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value();
    std::copy(v.values().begin(), v.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(offsets[k]));
  }
  return tape.record(std::move(out), ids,
                     [ids, offsets](const Tape& t, const NumArray& g, std::span<NumArray* const> gin) {
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!gin[k]) continue;
                         const auto n = t.value(ids[k]).size();
                         for (std::size_t i = 0; i < n; ++i) (*gin[k])[i] += g[offsets[k] + i];
                       }
                     });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  auto& tape = parts[0].tape();
  const auto r = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, widths, offsets;
  for (const auto& p : parts) {
    const auto& v = p.value();
    extents_of(v);
    if (v.rows() != r) {
      throw DimensionError("concat_cols: height " + shape_string(v.shape()) + " vs " +
                           std::to_string(r));
    }
    offsets.push_back(cols);
    widths.push_back(v.cols());
    cols += v.cols();
    ids.push_back(p.id());
  }
  NumArray out(Shape{r, cols});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * cols + offsets[k] + j] = v[i * widths[k] + j];
  }
  return tape.record(std::move(out), ids,
                     [=](const Tape&, const NumArray& g, std::span<NumArray* const> gin) {
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!gin[k]) continue;
                         for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < widths[k]; ++j)
                             (*gin[k])[i * widths[k] + j] += g[i * cols + offsets[k] + j];
                       }
                     });
}

Var unfold_windows(Var x, std::span<const std::size_t> lengths, std::size_t window) {
  const auto& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("unfold_windows expects a matrix, got " + shape_string(xv.shape()));
  if (window == 0) throw ContractError("unfold_windows: window must be positive");
  const auto T = checked_total(lengths, xv.rows(), "unfold_windows");
  const auto D = xv.cols();
  const auto half = (window - 1) / 2;
  // src[t * window + k] = source row feeding block k of output row t, or T if zero.
  std::vector<std::size_t> src(T * window, T);
  std::size_t offset = 0;
  for (auto len : lengths) {
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t k = 0; k < window; ++k) {
        const auto pos = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(half);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) {
          src[(offset + t) * window + k] = offset + static_cast<std::size_t>(pos);
        }
      }
    }
    offset += len;
  }
  const auto W = window * D;
  NumArray out(Shape{T, W});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < window; ++k) {
      const auto s = src[t * window + k];
      if (s == T) continue;
      std::copy_n(xv.values().begin() + static_cast<std::ptrdiff_t>(s * D), D,
                  out.values().begin() + static_cast<std::ptrdiff_t>(t * W + k * D));
    }
  }
  return x.tape().record(std::move(out), {x.id()},
                         [T, D, W, window, src = std::move(src)](const Tape&, const NumArray& g,
                                                                 std::span<NumArray* const> gin) {
                           auto& gx = *gin[0];
                           for (std::size_t t = 0; t < T; ++t) {
                             for (std::size_t k = 0; k < window; ++k) {
                               const auto s = src[t * window + k];
                               if (s == T) continue;
                               for (std::size_t d = 0; d < D; ++d) gx[s * D + d] += g[t * W + k * D + d];
                             }
                           }
                         });
}

Var segment_max(Var x, std::span<const std::size_t> lengths) {
  const auto& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("segment_max expects a matrix, got " + shape_string(xv.shape()));
  checked_total(lengths, xv.rows(), "segment_max");
  const auto H = xv.cols();
  const auto B = lengths.size();
  NumArray out(Shape{B, H});
  std::vector<std::size_t> arg(B * H);
  std::size_t offset = 0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      std::size_t best = offset;
      for (std::size_t t = offset + 1; t < offset + lengths[b]; ++t) {
        if (xv[t * H + h] > xv[best * H + h] || std::isnan(xv[t * H + h])) best = t;
      }
      arg[b * H + h] = best;
      out[b * H + h] = xv[best * H + h];
    }
    offset += lengths[b];
  }
  return x.tape().record(std::move(out), {x.id()},
                         [H, arg = std::move(arg)](const Tape&, const NumArray& g,
                                                   std::span<NumArray* const> gin) {
                           auto& gx = *gin[0];
                           for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i] * H + i % H] += g[i];
                         });
}

}  // namespace protocacl::num
