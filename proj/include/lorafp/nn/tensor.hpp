#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lorafp/nn/aligned.hpp"

namespace lorafp::nn {

/// Channels x height x width of one example.
struct Shape {
  int c = 1, h = 1, w = 1;

  std::size_t size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const { return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w); }
};

/// Batch of examples, NCHW row-major.
template <typename T>
struct Tensor {
  int n = 0;
  Shape shape;
  AlignedVector<T> data;

  Tensor() = default;
  Tensor(int batch, Shape s) : n(batch), shape(s), data(static_cast<std::size_t>(batch) * s.size(), T{}) {}

  void resize(int batch, Shape s) {
    n = batch;
    shape = s;
    data.assign(static_cast<std::size_t>(batch) * s.size(), T{});
  }
  /// Like resize, but leaves the contents unspecified (for outputs that are fully overwritten).
  void reshape(int batch, Shape s) {
    n = batch;
    shape = s;
    data.resize(static_cast<std::size_t>(batch) * s.size());
  }
  std::size_t stride() const noexcept { return shape.size(); }
  T* sample(int i) noexcept { return data.data() + static_cast<std::size_t>(i) * stride(); }
  const T* sample(int i) const noexcept { return data.data() + static_cast<std::size_t>(i) * stride(); }
};

}  // namespace lorafp::nn
