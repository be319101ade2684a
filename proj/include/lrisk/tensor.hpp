#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lrisk/error.hpp"

namespace lrisk {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Size of one leading-axis slice (e.g. one sample of a batch).
  std::size_t stride0() const { return rank() == 0 ? 0 : size() / shape_[0]; }
  std::span<double> slice0(std::size_t i) { return {data_.data() + i * stride0(), stride0()}; }
  std::span<const double> slice0(std::size_t i) const {
    return {data_.data() + i * stride0(), stride0()};
  }

  /// Same data, new shape of equal element count.
  Tensor reshaped(Shape shape) const;
  void fill(double v);

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace lrisk
