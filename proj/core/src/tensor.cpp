#include "fedtier/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "fedtier/error.hpp"

namespace fedtier {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void check_dims(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimension must be positive, got " + to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " needs " +
                     std::to_string(element_count(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ModelParams::ModelParams(std::vector<NamedTensor> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.name).second) throw ShapeError("duplicate parameter name '" + e.name + "'");
  }
}

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

const Tensor& ModelParams::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ShapeError("no parameter named '" + name + "'");
}

Tensor& ModelParams::at(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

bool ModelParams::same_layout(const ModelParams& other) const noexcept {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        entries_[i].tensor.shape() != other.entries_[i].tensor.shape()) {
      return false;
    }
  }
  return true;
}

void ModelParams::require_same_layout(const ModelParams& other, const char* context) const {
  if (entries_.size() != other.entries_.size()) {
    throw ShapeError(std::string(context) + ": parameter count " + std::to_string(entries_.size()) +
                     " vs " + std::to_string(other.entries_.size()));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.tensor.shape() != b.tensor.shape()) {
      throw ShapeError(std::string(context) + ": entry " + std::to_string(i) + " is " + a.name +
                       to_string(a.tensor.shape()) + " vs " + b.name + to_string(b.tensor.shape()));
    }
  }
}

ModelParams ModelParams::zeros_like() const {
  std::vector<NamedTensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back({e.name, Tensor(e.tensor.shape())});
  return ModelParams(std::move(out));
}

bool ModelParams::all_finite() const noexcept {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const NamedTensor& e) { return e.tensor.all_finite(); });
}

double max_abs_diff(const ModelParams& a, const ModelParams& b) {
  a.require_same_layout(b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto va = a[i].tensor.values();
    const auto vb = b[i].tensor.values();
    for (std::size_t k = 0; k < va.size(); ++k) m = std::max(m, std::abs(va[k] - vb[k]));
  }
  return m;
}

}  // namespace fedtier
