#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rnl/errors.hpp"

namespace rnl {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

// Dense row-major tensor, last axis fastest. Every extent is >= 1.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : Tensor(Shape{1}) {}
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  static Tensor scalar(T value) { return Tensor(Shape{1}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  // 2-D accessors.
  T at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }

  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Channels-last (T,H,W,C) clip. flatten() gives the (T*H*W, C) view.
template <typename T>
class FeatureClip {
 public:
  FeatureClip(std::size_t t, std::size_t h, std::size_t w, std::size_t c, T fill = T(0));
  explicit FeatureClip(Tensor<T> tensor);

  static FeatureClip unflatten(Tensor<T> flat, std::size_t t, std::size_t h, std::size_t w);

  std::size_t t() const noexcept { return tensor_.extent(0); }
  std::size_t h() const noexcept { return tensor_.extent(1); }
  std::size_t w() const noexcept { return tensor_.extent(2); }
  std::size_t c() const noexcept { return tensor_.extent(3); }
  std::size_t positions() const noexcept { return t() * h() * w(); }

  const Tensor<T>& tensor() const& noexcept { return tensor_; }
  Tensor<T> tensor() && noexcept { return std::move(tensor_); }

  Tensor<T> flatten() const& { return tensor_.reshaped({positions(), c()}); }
  Tensor<T> flatten() && {
    const Shape flat{positions(), c()};
    return std::move(tensor_).reshaped(flat);
  }

  std::size_t offset(std::size_t ti, std::size_t hi, std::size_t wi, std::size_t ci) const noexcept {
    return ((ti * h() + hi) * w() + wi) * c() + ci;
  }
  T at(std::size_t ti, std::size_t hi, std::size_t wi, std::size_t ci) const {
    return tensor_[offset(ti, hi, wi, ci)];
  }
  T& at(std::size_t ti, std::size_t hi, std::size_t wi, std::size_t ci) {
    return tensor_[offset(ti, hi, wi, ci)];
  }

  bool operator==(const FeatureClip& other) const = default;

 private:
  Tensor<T> tensor_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Library-produced values on finite input must stay finite. Checked in debug
// builds, or whenever RNL_CHECK_FINITE is defined.
template <typename T>
void debug_check_finite([[maybe_unused]] const Tensor<T>& out, [[maybe_unused]] const char* op) {
#if !defined(NDEBUG) || defined(RNL_CHECK_FINITE)
  if (!all_finite(out)) {
    throw ContractError(std::string(op) + " produced a non-finite value");
  }
#endif
}

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class FeatureClip<float>;
extern template class FeatureClip<double>;

}  // namespace rnl
