#include "pancraft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pancraft/error.hpp"

namespace pancraft {

Shape::Shape(std::initializer_list<int64_t> dims) : Shape(std::vector<int64_t>(dims)) {}

Shape::Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > kMaxRank) {
    throw ShapeError("tensor rank must be in [1, 4], got " + std::to_string(dims_.size()));
  }
  for (int64_t d : dims_) {
    if (d < 1) throw ShapeError("tensor extents must be >= 1, got " + str());
  }
}

int64_t Shape::dim(int i) const {
  const int r = rank();
  const int idx = i < 0 ? r + i : i;
  if (idx < 0 || idx >= r) throw ShapeError("dimension index out of range for " + str());
  return dims_[static_cast<size_t>(idx)];
}

int64_t Shape::numel() const {
  int64_t n = 1;
  for (int64_t d : dims_) n *= d;
  return dims_.empty() ? 0 : n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_.numel()), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != shape_.numel()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_.str());
  }
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape.numel() != shape_.numel()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(std::move(shape), data_);
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  require_same_shape(shape_, other.shape_, "operator+=");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  const Shape& inner = items.front().shape();
  if (inner.rank() >= Shape::kMaxRank) throw ShapeError("stack: result rank exceeds 4");
  std::vector<int64_t> dims{static_cast<int64_t>(items.size())};
  dims.insert(dims.end(), inner.dims().begin(), inner.dims().end());
  std::vector<T> data;
  data.reserve(static_cast<size_t>(inner.numel()) * items.size());
  for (const auto& t : items) {
    require_same_shape(inner, t.shape(), "stack");
    data.insert(data.end(), t.storage().begin(), t.storage().end());
  }
  return Tensor<T>(Shape(std::move(dims)), std::move(data));
}

template <typename T>
Tensor<T> unstack(const Tensor<T>& batch, int64_t i) {
  if (batch.rank() < 2) throw ShapeError("unstack: rank must be >= 2");
  if (i < 0 || i >= batch.dim(0)) throw ShapeError("unstack: index out of range");
  std::vector<int64_t> dims(batch.shape().dims().begin() + 1, batch.shape().dims().end());
  Shape inner(dims);
  const int64_t n = inner.numel();
  std::vector<T> data(batch.data() + i * n, batch.data() + (i + 1) * n);
  return Tensor<T>(std::move(inner), std::move(data));
}

template class Tensor<float>;
template class Tensor<double>;
template double max_abs_diff(const Tensor<float>&, const Tensor<float>&);
template double max_abs_diff(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> stack(std::span<const Tensor<float>>);
template Tensor<double> stack(std::span<const Tensor<double>>);
template Tensor<float> unstack(const Tensor<float>&, int64_t);
template Tensor<double> unstack(const Tensor<double>&, int64_t);

}  // namespace pancraft
