// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "dksan/errors.hpp"
#include "dksan/rng.hpp"

namespace dksan {

/// NCHW shape. All tensors in the library are dense 4-D.
struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  int64_t numel() const {
    return static_cast<int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
  }
};

/// Dense 4-D tensor, contiguous row-major (n,c,h,w):
/// flat index of (n,c,y,x) = ((n*C + c)*H + y)*W + x.
///
/// Reductions in this library (sum, mean, convolution accumulations)
/// always run in ascending flat-index order with a single accumulator,
/// so results are bit-reproducible on one platform.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape s) : shape_(s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
      throw contract_error("Tensor: negative dimension in " + s.str());
    data_.assign(static_cast<size_t>(s.numel()), T(0));
  }

  static Tensor zeros(Shape s) { return Tensor(s); }

  static Tensor full(Shape s, T value) {
    Tensor t(s);
    for (auto& v : t.data_) v = value;
    return t;
  }

  static Tensor ones(Shape s) { return full(s, T(1)); }

  static Tensor from(Shape s, std::vector<T> data) {
    if (static_cast<int64_t>(data.size()) != s.numel())
      throw contract_error("Tensor::from: " + std::to_string(data.size()) +
                           " values for shape " + s.str());
    Tensor t;
    t.shape_ = s;
    t.data_ = std::move(data);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  int64_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  int64_t index(int n, int c, int y, int x) const {
    return ((static_cast<int64_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  /// Pointer to the (n,c) spatial plane, h*w contiguous scalars.
  T* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

  void fill(T v) {
    for (auto& e : data_) e = v;
  }

  void release() {
    data_.clear();
    data_.shrink_to_fit();
    shape_ = Shape{};
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out{};
    std::vector<U> d(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
    return Tensor<U>::from(shape_, std::move(d));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
inline void ensure_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw contract_error(std::string(op) + ": shape mismatch " + a.shape().str() +
                         " vs " + b.shape().str());
}

/// Throws numeric_error on the first NaN/Inf, naming the operation.
template <typename T>
inline void ensure_finite(const Tensor<T>& t, const char* what) {
  const T* p = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(p[i])))
      throw numeric_error(std::string("non-finite value in ") + what + " at flat index " +
                          std::to_string(i));
  }
}

template <typename T>
inline Tensor<T> ew_add(const Tensor<T>& a, const Tensor<T>& b) {
  ensure_same_shape(a, b, "ew_add");
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  ensure_finite(out, "ew_add");
  return out;
}

template <typename T>
inline Tensor<T> ew_sub(const Tensor<T>& a, const Tensor<T>& b) {
  ensure_same_shape(a, b, "ew_sub");
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  ensure_finite(out, "ew_sub");
  return out;
}

template <typename T>
inline Tensor<T> ew_mul(const Tensor<T>& a, const Tensor<T>& b) {
  ensure_same_shape(a, b, "ew_mul");
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  ensure_finite(out, "ew_mul");
  return out;
}

template <typename T>
inline Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * s;
  ensure_finite(out, "scale");
  return out;
}

/// Ascending flat-index accumulation; documented reduction order.
template <typename T>
inline T sum(const Tensor<T>& a) {
  T acc(0);
  for (int64_t i = 0; i < a.numel(); ++i) acc += a[i];
  return acc;
}

template <typename T>
inline T mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw contract_error("mean: empty tensor");
  return sum(a) / static_cast<T>(a.numel());
}

template <typename T>
inline T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  ensure_same_shape(a, b, "max_abs_diff");
  T m(0);
  for (int64_t i = 0; i < a.numel(); ++i) {
    T d = std::abs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

template <typename T>
inline bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  for (int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

template <typename T>
inline Tensor<T> clamp01(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i)
    out[i] = a[i] < T(0) ? T(0) : (a[i] > T(1) ? T(1) : a[i]);
  return out;
}

/// Uniform in +-sqrt(6/fan_in); element order is ascending flat index,
/// so a given (shape, fan_in, rng state) always yields the same tensor.
template <typename T>
inline Tensor<T> kaiming_uniform(Shape s, int fan_in, Rng& rng) {
  if (fan_in < 1) throw contract_error("kaiming_uniform: fan_in must be >= 1");
  const double bound = std::sqrt(6.0 / fan_in);
  Tensor<T> out(s);
  for (int64_t i = 0; i < out.numel(); ++i)
    out[i] = static_cast<T>(rng.uniform(-bound, bound));
  return out;
}

}  // namespace dksan
