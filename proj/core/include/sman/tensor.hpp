#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sman/errors.hpp"

namespace sman {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major tensor. Extents are strictly positive; a scalar is {1}.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    data_.assign(checked_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
    return Tensor({rows, cols}, std::vector<T>(values));
  }

  static Tensor scalar(T value) { return Tensor({1}, std::vector<T>{value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Matrix view: rank-1 tensors read as a single row.
  std::size_t rows() const { return rank() == 1 ? 1 : shape_.at(0); }
  std::size_t cols() const { return rank() == 1 ? shape_.at(0) : size() / shape_.at(0); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols(), cols());
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Tensor& other) const = default;

 private:
  static std::size_t checked_size(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
    std::size_t n = 1;
    for (auto extent : shape) {
      if (extent == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape));
      n *= extent;
    }
    return n;
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
void require_matrix(const Tensor<T>& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected a 2-D tensor, got " + shape_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

// C = op(A) * op(B), Eigen-backed.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_a = false,
                 bool transpose_b = false);

// C += op(A) * op(B); C must already have the product shape.
template <typename T>
void matmul_accumulate(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c, bool transpose_a,
                       bool transpose_b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

}  // namespace sman
