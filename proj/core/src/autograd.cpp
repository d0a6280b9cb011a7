#include "pancraft/autograd.hpp"

#include "pancraft/error.hpp"

namespace pancraft {

template <typename T>
Param<T>& ParamStore<T>::add(const std::string& name, Tensor<T> init) {
  if (index_.count(name)) throw Error("duplicate parameter name '" + name + "'");
  params_.push_back(std::make_unique<Param<T>>(name, std::move(init)));
  Param<T>& p = *params_.back();
  index_.emplace(name, &p);
  return p;
}

template <typename T>
Param<T>* ParamStore<T>::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

template <typename T>
const Param<T>* ParamStore<T>::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename T>
int64_t ParamStore<T>::element_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

template <typename T>
void Tape<T>::check_usable() const {
  if (consumed_) throw Error("tape already consumed by backward(); call reset() first");
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  check_usable();
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return Var<T>(std::move(node), this);
}

template <typename T>
Var<T> Tape<T>::param(Param<T>& p) {
  check_usable();
  if (auto it = leaves_.find(&p); it != leaves_.end()) return it->second;
  auto node = std::make_shared<Node<T>>();
  node->value = p.value;
  node->param = &p;
  node->requires_grad = recording_;
  Var<T> v(node, this);
  if (recording_) {
    entries_.push_back(node);
    leaves_.emplace(&p, v);
  }
  return v;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::vector<Var<T>> inputs, typename Node<T>::BackwardFn backward) {
  check_usable();
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape() != this) throw Error("operation mixes values from different tapes");
    needs = needs || in.requires_grad();
  }
  if (recording_ && needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward);
    entries_.push_back(node);
  }
  return Var<T>(std::move(node), this);
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (!loss.valid() || loss.tape() != this) throw Error("backward: loss was not produced on this tape");
  if (!loss.requires_grad()) throw Error("backward: loss is detached from every parameter");
  if (loss.value().numel() != 1) throw ShapeError("backward: loss must be a scalar, got " + loss.shape().str());
  check_usable();
  loss.node()->grad_buffer().fill(T(1));
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    Node<T>& n = **it;
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(n);
    if (n.param) n.param->grad += n.grad;
  }
  consumed_ = true;
}

template <typename T>
void Tape<T>::reset() {
  entries_.clear();
  leaves_.clear();
  consumed_ = false;
}

template <typename T>
size_t Tape<T>::value_bytes() const {
  size_t b = 0;
  for (const auto& e : entries_) b += static_cast<size_t>(e->value.numel()) * sizeof(T);
  return b;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace pancraft
