#include "protocacl/numerics/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "protocacl/errors.hpp"

namespace protocacl::num {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

void check_extents(const Shape& shape) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("zero extent in shape " + shape_string(shape));
  }
}

}  // namespace

NumArray::NumArray(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  values_.assign(shape_size(shape_), fill);
}

NumArray::NumArray(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_extents(shape_);
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not hold " +
                         std::to_string(values_.size()) + " values");
  }
}

NumArray NumArray::vector(std::vector<double> v) {
  const auto n = v.size();
  return NumArray(Shape{n}, std::move(v));
}

NumArray NumArray::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return NumArray(Shape{rows, cols}, std::move(v));
}

NumArray NumArray::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> flat;
  std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged matrix literal");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return NumArray(Shape{rows.size(), cols}, std::move(flat));
}

double NumArray::item() const {
  if (values_.size() != 1) {
    throw ContractError("item() on non-scalar array of shape " + shape_string(shape_));
  }
  return values_[0];
}

void NumArray::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

NumArray NumArray::reshaped(Shape shape) const { return NumArray(std::move(shape), values_); }

double max_abs_diff(const NumArray& a, const NumArray& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace protocacl::num
