#include "rnl/tensor.hpp"

#include <sstream>

namespace rnl {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be >= 1, got " + to_string(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(element_count(shape_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != element_count(shape_)) {
    throw DimensionError("tensor of shape " + to_string(shape_) + " needs " +
                         std::to_string(element_count(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const& {
  return Tensor(std::move(shape), data_);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) && {
  return Tensor(std::move(shape), std::move(data_));
}

template <typename T>
FeatureClip<T>::FeatureClip(std::size_t t, std::size_t h, std::size_t w, std::size_t c, T fill)
    : tensor_(Shape{t, h, w, c}, fill) {}

template <typename T>
FeatureClip<T>::FeatureClip(Tensor<T> tensor) : tensor_(std::move(tensor)) {
  if (tensor_.rank() != 4) {
    throw DimensionError("feature clip needs a rank-4 (T,H,W,C) tensor, got " + to_string(tensor_.shape()));
  }
}

template <typename T>
FeatureClip<T> FeatureClip<T>::unflatten(Tensor<T> flat, std::size_t t, std::size_t h, std::size_t w) {
  if (flat.rank() != 2 || flat.extent(0) != t * h * w) {
    throw DimensionError("cannot unflatten " + to_string(flat.shape()) + " into " + to_string({t, h, w}) +
                         " positions");
  }
  const std::size_t c = flat.extent(1);
  return FeatureClip(std::move(flat).reshaped({t, h, w, c}));
}

template class Tensor<float>;
template class Tensor<double>;
template class FeatureClip<float>;
template class FeatureClip<double>;

}  // namespace rnl
