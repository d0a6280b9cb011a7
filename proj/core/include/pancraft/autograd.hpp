#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "pancraft/tensor.hpp"

namespace pancraft {

/// A learnable tensor and its accumulated gradient.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(T(0)); }
};

/// Owns every parameter of a model, in registration order.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, Tensor<T> init);
  Param<T>* find(const std::string& name);
  const Param<T>* find(const std::string& name) const;

  void zero_grad();
  int64_t element_count() const;
  size_t size() const { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Param<T>>> params_;
  std::unordered_map<std::string, Param<T>*> index_;
};

template <typename T>
struct Node {
  using BackwardFn = std::function<void(Node&)>;

  Tensor<T> value;
  Tensor<T> grad;  // allocated on first use
  bool requires_grad = false;
  Param<T>* param = nullptr;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
  /// Gradient buffer of input i, or nullptr when that input needs no gradient.
  Tensor<T>* input_grad(size_t i) {
    Node& in = *inputs[i];
    return in.requires_grad ? &in.grad_buffer() : nullptr;
  }
  const Tensor<T>& input_value(size_t i) const { return inputs[i]->value; }
};

template <typename T>
class Tape;

/// Handle to a value produced on (or fed into) a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(std::shared_ptr<Node<T>> node, Tape<T>* tape) : node_(std::move(node)), tape_(tape) {}

  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t dim(int i) const { return node_->value.dim(i); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool valid() const { return node_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }
  /// Gradient accumulated by the last backward pass (empty if none reached it).
  const Tensor<T>& grad() const { return node_->grad; }

 private:
  std::shared_ptr<Node<T>> node_;
  Tape<T>* tape_ = nullptr;
};

/// Ordered record of differentiable operations. Entries are appended in
/// creation order, so the list is topologically sorted by construction.
/// A non-recording tape keeps nothing alive beyond the Vars that refer to
/// it, which is what inference uses.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  /// Input that never receives gradients.
  Var<T> constant(Tensor<T> value);
  /// Leaf bound to a parameter; one leaf per parameter per tape.
  Var<T> param(Param<T>& p);
  /// Appends an operation output. `backward` runs only if some input
  /// requires a gradient.
  Var<T> record(Tensor<T> value, std::vector<Var<T>> inputs, typename Node<T>::BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and visits entries once in reverse order,
  /// then adds leaf gradients into their Params. The tape must be reset
  /// before it can record or run backward again.
  void backward(const Var<T>& loss);
  void reset();

  size_t size() const { return entries_.size(); }
  /// Bytes held by recorded values.
  size_t value_bytes() const;

 private:
  void check_usable() const;

  bool recording_;
  bool consumed_ = false;
  std::vector<std::shared_ptr<Node<T>>> entries_;
  std::unordered_map<const Param<T>*, Var<T>> leaves_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace pancraft
