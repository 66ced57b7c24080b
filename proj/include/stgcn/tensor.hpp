#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "stgcn/common.hpp"

namespace stgcn {

// Dense row-major tensor, rank 1..5. Deliberately minimal: the layer kernels
// index raw data with explicit strides.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    data.assign(numel_of(shape), S(0));
  }

  Tensor(std::initializer_list<int> shp) : Tensor(std::vector<int>(shp)) {}

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw ConfigError("negative tensor dimension");
      n *= std::size_t(d);
    }
    return s.empty() ? 0 : n;
  }

  std::size_t numel() const { return data.size(); }
  int dim(std::size_t i) const { return shape[i]; }
  bool empty() const { return data.empty(); }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  void fill(S v) { data.assign(data.size(), v); }

  S& operator[](std::size_t i) { return data[i]; }
  const S& operator[](std::size_t i) const { return data[i]; }

  S& at2(int a, int b) { return data[std::size_t(a) * shape[1] + b]; }
  const S& at2(int a, int b) const { return data[std::size_t(a) * shape[1] + b]; }

  S& at3(int a, int b, int c) {
    return data[(std::size_t(a) * shape[1] + b) * shape[2] + c];
  }
  const S& at3(int a, int b, int c) const {
    return data[(std::size_t(a) * shape[1] + b) * shape[2] + c];
  }

  S& at4(int a, int b, int c, int d) {
    return data[((std::size_t(a) * shape[1] + b) * shape[2] + c) * std::size_t(shape[3]) + d];
  }
  const S& at4(int a, int b, int c, int d) const {
    return data[((std::size_t(a) * shape[1] + b) * shape[2] + c) * std::size_t(shape[3]) + d];
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename S>
bool bitwise_equal(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape != b.shape) return false;
  return std::memcmp(a.ptr(), b.ptr(), a.numel() * sizeof(S)) == 0;
}

}  // namespace stgcn
