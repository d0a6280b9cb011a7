#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pancraft {

/// Extents of a tensor, outermost first. Images use (batch, channel, height,
/// width); single images drop the batch axis.
class Shape {
 public:
  static constexpr int kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<int64_t> dims);
  explicit Shape(std::vector<int64_t> dims);

  int rank() const { return static_cast<int>(dims_.size()); }
  int64_t operator[](int i) const { return dims_.at(static_cast<size_t>(i)); }
  /// Negative indices count from the back.
  int64_t dim(int i) const;
  int64_t numel() const;
  const std::vector<int64_t>& dims() const { return dims_; }

  bool operator==(const Shape& other) const = default;
  std::string str() const;

 private:
  std::vector<int64_t> dims_;
};

enum class DType : uint8_t { F32 = 0, F64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::F32; }
template <>
constexpr DType dtype_of<double>() { return DType::F64; }

/// Dense row-major array. Copies are deep; moves are cheap.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }

  bool empty() const { return data_.empty(); }
  const Shape& shape() const { return shape_; }
  int rank() const { return shape_.rank(); }
  int64_t dim(int i) const { return shape_.dim(i); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  static constexpr DType dtype() { return dtype_of<T>(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  T operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Indexing for rank-4 (b, c, h, w) and rank-3 (c, h, w) tensors.
  T& at(int64_t b, int64_t c, int64_t h, int64_t w) { return data_[offset4(b, c, h, w)]; }
  T at(int64_t b, int64_t c, int64_t h, int64_t w) const { return data_[offset4(b, c, h, w)]; }
  T& at(int64_t c, int64_t h, int64_t w) { return data_[offset3(c, h, w)]; }
  T at(int64_t c, int64_t h, int64_t w) const { return data_[offset3(c, h, w)]; }

  Tensor reshaped(Shape shape) const;
  template <typename U>
  Tensor<U> cast() const;

  void fill(T v);
  Tensor& operator+=(const Tensor& other);

  bool operator==(const Tensor& other) const { return shape_ == other.shape_ && data_ == other.data_; }

 private:
  size_t offset4(int64_t b, int64_t c, int64_t h, int64_t w) const {
    return static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w);
  }
  size_t offset3(int64_t c, int64_t h, int64_t w) const {
    return static_cast<size_t>((c * shape_[1] + h) * shape_[2] + w);
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
template <typename U>
Tensor<U> Tensor<T>::cast() const {
  std::vector<U> out(data_.begin(), data_.end());
  return Tensor<U>(shape_, std::move(out));
}

/// Throws ShapeError when a != b, naming the operation.
void require_same_shape(const Shape& a, const Shape& b, const char* op);

/// Largest |a - b| over all elements.
template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

/// Stacks equally-shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items);

/// Item `i` of the leading axis, with that axis dropped.
template <typename T>
Tensor<T> unstack(const Tensor<T>& batch, int64_t i);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace pancraft
