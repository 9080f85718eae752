#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace protocacl::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Rank 0 is a scalar, rank 1 a vector,
// rank 2 a matrix; the differentiable operations are defined up to rank 2.
class NumArray {
 public:
  NumArray() : shape_{}, values_(1, 0.0) {}
  explicit NumArray(Shape shape, double fill = 0.0);
  NumArray(Shape shape, std::vector<double> values);

  static NumArray scalar(double v) { return NumArray(Shape{}, std::vector<double>{v}); }
  static NumArray vector(std::vector<double> v);
  static NumArray matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
  static NumArray matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }

  // Matrix view: scalars are 1x1, vectors are a single row.
  std::size_t rows() const noexcept { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept { return rank() == 0 ? 1 : shape_.back(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& data() noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return std::span<double>(values_).subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols(), cols());
  }

  // Value of a size-1 array.
  double item() const;

  void fill(double v);
  NumArray reshaped(Shape shape) const;

  friend bool operator==(const NumArray&, const NumArray&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

double max_abs_diff(const NumArray& a, const NumArray& b);

}  // namespace protocacl::num
