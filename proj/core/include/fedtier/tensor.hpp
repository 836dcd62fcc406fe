#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedtier {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

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

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  void fill(double v);
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Ordered, named parameter set of one model. Order is fixed by the
/// architecture that produced it; equality is bitwise on values.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(std::vector<NamedTensor> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t parameter_count() const noexcept;

  const std::vector<NamedTensor>& entries() const noexcept { return entries_; }
  NamedTensor& operator[](std::size_t i) { return entries_[i]; }
  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  /// Same (name, shape) sequence.
  bool same_layout(const ModelParams& other) const noexcept;
  /// Throws ShapeError naming the first differing entry.
  void require_same_layout(const ModelParams& other, const char* context) const;

  ModelParams zeros_like() const;
  bool all_finite() const noexcept;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<NamedTensor> entries_;
};

/// Largest |a - b| over all coordinates; layouts must match.
double max_abs_diff(const ModelParams& a, const ModelParams& b);

}  // namespace fedtier
