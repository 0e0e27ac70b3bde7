// Dense row-major tensor plus the handful of kernels the model needs.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kpsign/error.hpp"

namespace kpsign {

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, T fill = T{0})
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
      throw InvalidArgument("tensor data length does not match shape");
    }
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // 2-D accessors; callers guarantee rank() == 2.
  T& at(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
  const T& at(std::size_t r, std::size_t c) const noexcept {
    return data_[r * shape_[1] + c];
  }
  std::span<T> row(std::size_t r) noexcept {
    return std::span<T>(data_).subspan(r * shape_[1], shape_[1]);
  }
  std::span<const T> row(std::size_t r) const noexcept {
    return std::span<const T>(data_).subspan(r * shape_[1], shape_[1]);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor&) const = default;

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    for (std::size_t d : shape) {
      if (d == 0) throw InvalidArgument("tensor dimensions must be positive");
    }
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& in) {
  std::vector<To> out(in.values().begin(), in.values().end());
  return Tensor<To>(in.shape(), std::move(out));
}

namespace kernels {

// out[m,n] (+)= a[m,k] * b[k,n]
template <typename T>
void matmul(const T* a, const T* b, T* out, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate = false) {
  if (!accumulate) std::fill(out, out + m * n, T{0});
  for (std::size_t i = 0; i < m; ++i) {
    T* orow = out + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T{0}) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out[m,n] (+)= a[m,k] * b[n,k]^T
template <typename T>
void matmul_bt(const T* a, const T* b, T* out, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate = false) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out[i * n + j] = accumulate ? out[i * n + j] + acc : acc;
    }
  }
}

// out[k,n] (+)= a[m,k]^T * b[m,n]
template <typename T>
void matmul_at(const T* a, const T* b, T* out, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate = false) {
  if (!accumulate) std::fill(out, out + k * n, T{0});
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T{0}) continue;
      T* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// In-place numerically stable softmax over one row.
template <typename T>
void softmax_row(std::span<T> row) {
  const T mx = *std::max_element(row.begin(), row.end());
  T sum{0};
  for (T& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (T& v : row) v /= sum;
}

}  // namespace kernels
}  // namespace kpsign
