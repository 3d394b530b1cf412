#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "fnlearn/errors.hpp"

namespace fnlearn::nn {

/// Dense row-major array with an explicit shape.
template <class T>
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(count(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_)) throw ShapeMismatch("tensor data does not match shape");
  }

  static std::size_t count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  T at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  T at(std::size_t i, std::size_t j, std::size_t k) const { return data_[(i * shape_[1] + j) * shape_[2] + k]; }

  Tensor reshaped(Shape s) const& {
    if (count(s) != data_.size()) throw ShapeMismatch("reshape changes element count");
    return Tensor(std::move(s), data_);
  }
  Tensor reshaped(Shape s) && {
    if (count(s) != data_.size()) throw ShapeMismatch("reshape changes element count");
    return Tensor(std::move(s), std::move(data_));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Views a rank-2 slice of contiguous storage as a row-major matrix.
template <class T>
Eigen::Map<RowMatrix<T>> as_matrix(T* data, std::size_t rows, std::size_t cols) {
  return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
template <class T>
Eigen::Map<const RowMatrix<T>> as_matrix(const T* data, std::size_t rows, std::size_t cols) {
  return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <class T>
Eigen::Map<RowMatrix<T>> as_matrix(Tensor<T>& t) {
  return as_matrix(t.data(), t.dim(0), t.size() / t.dim(0));
}
template <class T>
Eigen::Map<const RowMatrix<T>> as_matrix(const Tensor<T>& t) {
  return as_matrix(t.data(), t.dim(0), t.size() / t.dim(0));
}

/// A trainable array and its accumulated gradient.
template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, typename Tensor<T>::Shape shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

enum class Mode { kTrain, kEval };

}  // namespace fnlearn::nn
