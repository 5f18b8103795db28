#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dapotion/common.hpp"

namespace dapotion::nn {

struct Shape5 {
  int n = 0, c = 0, w = 1, h = 1, d = 1;
  std::size_t spatial() const { return static_cast<std::size_t>(w) * h * d; }
  std::size_t per_sample() const { return spatial() * c; }
  std::size_t size() const { return per_sample() * n; }
  friend bool operator==(const Shape5&, const Shape5&) = default;
};

inline std::string to_string(const Shape5& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.w) + ", " +
         std::to_string(s.h) + ", " + std::to_string(s.d) + ")";
}

/// Dense (batch, channels, W, H, D) tensor, D fastest.
template <typename T>
class Tensor5 {
 public:
  Tensor5() = default;
  explicit Tensor5(Shape5 shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}

  const Shape5& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T* sample(int n) { return data_.data() + n * shape_.per_sample(); }
  const T* sample(int n) const { return data_.data() + n * shape_.per_sample(); }
  T* plane(int n, int c) { return sample(n) + c * shape_.spatial(); }
  const T* plane(int n, int c) const { return sample(n) + c * shape_.spatial(); }

  T& at(int n, int c, int x, int y, int z) { return data_[index(n, c, x, y, z)]; }
  T at(int n, int c, int x, int y, int z) const { return data_[index(n, c, x, y, z)]; }
  T& operator()(int n, int c) { return data_[n * shape_.per_sample() + c * shape_.spatial()]; }
  T operator()(int n, int c) const { return data_[n * shape_.per_sample() + c * shape_.spatial()]; }

  friend bool operator==(const Tensor5&, const Tensor5&) = default;

 private:
  std::size_t index(int n, int c, int x, int y, int z) const {
    return (((static_cast<std::size_t>(n) * shape_.c + c) * shape_.w + x) * shape_.h + y) * shape_.d + z;
  }

  Shape5 shape_;
  std::vector<T> data_;
};

template <typename T>
bool all_finite(const Tensor5<T>& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](T v) { return std::isfinite(v); });
}

/// Trainable tensor with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    std::size_t count = 1;
    for (int v : shape) count *= static_cast<std::size_t>(v);
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Non-trainable state saved with the model (batchnorm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
};

}  // namespace dapotion::nn
