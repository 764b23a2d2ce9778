#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "lvq/errors.hpp"

namespace lvq {

using extents = std::vector<std::int64_t>;

inline std::int64_t shape_product(const extents& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         std::multiplies<>());
}

inline std::string shape_to_string(const extents& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense n-dimensional array, row-major, value semantics. T is float for
/// training and double for gradient checking; nothing else is supported.
template <typename T>
class Tensor {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "Tensor supports single and double precision only");

public:
  Tensor() = default;

  Tensor(extents shape, T fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_product(shape_)), fill);
  }

  Tensor(extents shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (static_cast<std::int64_t>(data_.size()) != shape_product(shape_)) {
      throw shape_error("data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_to_string(shape_));
    }
  }

  static Tensor zeros(extents shape) { return Tensor(std::move(shape), T{0}); }
  static Tensor full(extents shape, T fill) { return Tensor(std::move(shape), fill); }

  const extents& shape() const noexcept { return shape_; }
  std::int64_t rank() const noexcept { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Row-major strides derived from the shape.
  extents strides() const {
    extents s(shape_.size(), 1);
    for (std::int64_t i = static_cast<std::int64_t>(shape_.size()) - 2; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] =
          s[static_cast<std::size_t>(i + 1)] * shape_[static_cast<std::size_t>(i + 1)];
    }
    return s;
  }

  std::int64_t flat_index(const extents& idx) const {
    if (idx.size() != shape_.size()) {
      throw index_error("multi-index rank " + std::to_string(idx.size()) +
                        " does not match tensor rank " + std::to_string(shape_.size()));
    }
    std::int64_t flat = 0;
    std::int64_t stride = 1;
    for (std::int64_t k = static_cast<std::int64_t>(shape_.size()) - 1; k >= 0; --k) {
      const auto ku = static_cast<std::size_t>(k);
      if (idx[ku] < 0 || idx[ku] >= shape_[ku]) {
        throw index_error("index " + std::to_string(idx[ku]) + " out of range for axis " +
                          std::to_string(k) + " with extent " + std::to_string(shape_[ku]));
      }
      flat += idx[ku] * stride;
      stride *= shape_[ku];
    }
    return flat;
  }

  T at(const extents& idx) const { return data_[static_cast<std::size_t>(flat_index(idx))]; }
  T& at(const extents& idx) { return data_[static_cast<std::size_t>(flat_index(idx))]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

private:
  static void validate_shape(const extents& shape) {
    for (auto e : shape) {
      if (e < 1) {
        throw shape_error("invalid extent " + std::to_string(e) + " in shape " +
                          shape_to_string(shape));
      }
    }
  }

  extents shape_;
  std::vector<T> data_;
};

/// Flat tensor of the given shape with every element equal to fill.
template <typename T>
Tensor<T> create(const extents& shape, T fill) {
  return Tensor<T>(shape, fill);
}

enum class ElementwiseOp { add, sub, mul };

/// c[i] = op(a[i], b[i]); shapes must match exactly, no broadcasting.
template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, ElementwiseOp op) {
  if (!a.same_shape(b)) {
    throw shape_error("elementwise operands differ: " + shape_to_string(a.shape()) +
                      " vs " + shape_to_string(b.shape()));
  }
  Tensor<T> c = a;
  T* cd = c.data();
  const T* bd = b.data();
  const std::int64_t n = c.size();
  switch (op) {
    case ElementwiseOp::add:
      for (std::int64_t i = 0; i < n; ++i) cd[i] += bd[i];
      break;
    case ElementwiseOp::sub:
      for (std::int64_t i = 0; i < n; ++i) cd[i] -= bd[i];
      break;
    case ElementwiseOp::mul:
      for (std::int64_t i = 0; i < n; ++i) cd[i] *= bd[i];
      break;
  }
  return c;
}

/// Same flat data, new shape; element counts must agree.
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, extents new_shape) {
  if (shape_product(new_shape) != a.size()) {
    throw shape_error("reshape from " + shape_to_string(a.shape()) + " to " +
                      shape_to_string(new_shape) + " changes element count");
  }
  return Tensor<T>(std::move(new_shape), a.storage());
}

/// Pads each axis by (before, after) with a constant value.
template <typename T>
Tensor<T> pad(const Tensor<T>& a,
              const std::vector<std::pair<std::int64_t, std::int64_t>>& per_axis,
              T value) {
  if (per_axis.size() != a.shape().size()) {
    throw shape_error("pad spec rank " + std::to_string(per_axis.size()) +
                      " does not match tensor rank " + std::to_string(a.shape().size()));
  }
  extents out_shape(a.shape().size());
  for (std::size_t k = 0; k < per_axis.size(); ++k) {
    auto [before, after] = per_axis[k];
    if (before < 0 || after < 0) {
      throw shape_error("negative padding on axis " + std::to_string(k));
    }
    out_shape[k] = before + a.shape()[k] + after;
  }
  Tensor<T> out(out_shape, value);
  const extents in_strides = a.strides();
  const extents out_strides = out.strides();

  extents idx(a.shape().size(), 0);
  const std::int64_t n = a.size();
  for (std::int64_t flat = 0; flat < n; ++flat) {
    std::int64_t out_flat = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out_flat += (idx[k] + per_axis[k].first) * out_strides[k];
    }
    out[out_flat] = a[flat];
    for (std::int64_t k = static_cast<std::int64_t>(idx.size()) - 1; k >= 0; --k) {
      const auto ku = static_cast<std::size_t>(k);
      if (++idx[ku] < a.shape()[ku]) break;
      idx[ku] = 0;
    }
  }
  return out;
}

}  // namespace lvq
