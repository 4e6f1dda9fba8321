#include "rnl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace rnl {

namespace {

template <typename T>
void require_rank2(const Tensor<T>& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + " needs a rank-2 tensor, got " + to_string(a.shape()));
  }
}

template <typename T, typename F>
Tensor<T> broadcast_binary(const Tensor<T>& a, const Tensor<T>& b, F f, const char* op) {
  if (a.shape() == b.shape()) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    debug_check_finite(out, op);
    return out;
  }
  Shape shape;
  try {
    shape = broadcast_shape(a.shape(), b.shape());
  } catch (const DimensionError&) {
    throw DimensionError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " are not broadcastable");
  }
  const std::size_t rank = shape.size();
  // Strides with zero along broadcast axes.
  std::vector<std::size_t> sa(rank), sb(rank);
  std::size_t ra = 1, rb = 1;
  for (std::size_t k = rank; k-- > 0;) {
    sa[k] = a.extent(k) == 1 ? 0 : ra;
    sb[k] = b.extent(k) == 1 ? 0 : rb;
    ra *= a.extent(k);
    rb *= b.extent(k);
  }
  Tensor<T> out(shape);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k < rank; ++k) {
      ia += idx[k] * sa[k];
      ib += idx[k] * sb[k];
    }
    out[i] = f(a[ia], b[ib]);
    for (std::size_t k = rank; k-- > 0;) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
  debug_check_finite(out, op);
  return out;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) {
    throw DimensionError("broadcast needs equal ranks, got " + to_string(a) + " and " + to_string(b));
  }
  Shape out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == b[k] || b[k] == 1) {
      out[k] = a[k];
    } else if (a[k] == 1) {
      out[k] = b[k];
    } else {
      throw DimensionError("shapes " + to_string(a) + " and " + to_string(b) + " are not broadcastable");
    }
  }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw DimensionError("matmul inner extents differ: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Tensor<T> c({m, n});
  std::vector<double> row(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const T* brow = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * static_cast<double>(brow[j]);
    }
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = static_cast<T>(row[j]);
  }
  debug_check_finite(c, "matmul");
  return c;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  require_rank2(a, "transpose2d");
  const std::size_t m = a.extent(0), n = a.extent(1);
  Tensor<T> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
  require_rank2(a, "softmax_rows");
  const std::size_t m = a.extent(0), n = a.extent(1);
  Tensor<T> out(a.shape());
  std::vector<double> e(n);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = a.data().data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      e[j] = std::exp(static_cast<double>(row[j]) - mx);
      total += e[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<T>(e[j] / total);
  }
  debug_check_finite(out, "softmax_rows");
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T k) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * k;
  debug_check_finite(out, "scale");
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return broadcast_binary(a, b, std::plus<T>{}, "add");
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  return broadcast_binary(a, b, std::multiplies<T>{}, "hadamard");
}

template <typename T>
double sum(const Tensor<T>& a) {
  double total = 0.0;
  for (T v : a.data()) total += v;
  return total;
}

template <typename T>
FeatureClip<T> conv1x1(const FeatureClip<T>& x, const Tensor<T>& w, const std::optional<Tensor<T>>& bias) {
  if (w.rank() != 2 || w.extent(0) != x.c()) {
    throw DimensionError("conv1x1 weight " + to_string(w.shape()) + " does not match input channels " +
                         std::to_string(x.c()));
  }
  Tensor<T> y = matmul(x.flatten(), w);
  if (bias) {
    if (bias->size() != w.extent(1)) {
      throw DimensionError("conv1x1 bias " + to_string(bias->shape()) + " does not match output channels " +
                           std::to_string(w.extent(1)));
    }
    y = add(y, bias->reshaped({1, w.extent(1)}));
  }
  return FeatureClip<T>::unflatten(std::move(y), x.t(), x.h(), x.w());
}

template <typename T>
Tensor<T> batch_norm_inference(const Tensor<T>& x, const BatchNormParams<T>& bn) {
  const std::size_t c = x.shape().back();
  for (const Tensor<T>* p : {&bn.gamma, &bn.beta, &bn.mean, &bn.var}) {
    if (p->size() != c) {
      throw DimensionError("batch norm parameter of shape " + to_string(p->shape()) + " does not match " +
                           std::to_string(c) + " channels");
    }
  }
  std::vector<double> mul(c), shift(c);
  for (std::size_t k = 0; k < c; ++k) {
    if (bn.var[k] < T(0)) throw ArgumentError("batch norm variance must be non-negative");
    const double inv = 1.0 / std::sqrt(static_cast<double>(bn.var[k]) + bn.eps);
    mul[k] = inv * bn.gamma[k];
    shift[k] = bn.beta[k];
  }
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t k = i % c;
    out[i] = static_cast<T>((static_cast<double>(x[i]) - bn.mean[k]) * mul[k] + shift[k]);
  }
  debug_check_finite(out, "batch_norm_inference");
  return out;
}

#define RNL_INSTANTIATE_OPS(T)                                                                          \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> transpose2d(const Tensor<T>&);                                                     \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                                    \
  template Tensor<T> relu(const Tensor<T>&);                                                            \
  template Tensor<T> scale(const Tensor<T>&, T);                                                        \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> hadamard(const Tensor<T>&, const Tensor<T>&);                                      \
  template double sum(const Tensor<T>&);                                                                \
  template FeatureClip<T> conv1x1(const FeatureClip<T>&, const Tensor<T>&, const std::optional<Tensor<T>>&); \
  template Tensor<T> batch_norm_inference(const Tensor<T>&, const BatchNormParams<T>&);

RNL_INSTANTIATE_OPS(float)
RNL_INSTANTIATE_OPS(double)

}  // namespace rnl
