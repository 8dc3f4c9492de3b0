// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/ad/tensor.hpp"

#include <cmath>
#include <sstream>

#include "gnosis/ad/params.hpp"
#include "gnosis/errors.hpp"

namespace gnosis::ad {

std::size_t numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << "]";
  return os.str();
}

template <class T>
T Tensor<T>::item() const {
  if (node_->value.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(node_->shape));
  }
  return node_->value[0];
}

template <class T>
Node<T>* Tape<T>::push(Shape shape, std::vector<T> value, const char* op, bool requires_grad) {
  if (numel(shape) != value.size()) {
    throw ShapeError(std::string(op) + ": shape " + to_string(shape) + " does not hold " +
                     std::to_string(value.size()) + " values");
  }
  auto node = std::make_unique<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->op = op;
  node->tape = this;
  if (requires_grad) node->grad.assign(node->value.size(), T(0));
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

template <class T>
Tensor<T> Tape<T>::constant(Shape shape, std::vector<T> values) {
  return Tensor<T>(push(std::move(shape), std::move(values), "constant", false));
}

template <class T>
Tensor<T> Tape<T>::constant(Shape shape, std::span<const T> values) {
  return constant(std::move(shape), std::vector<T>(values.begin(), values.end()));
}

template <class T>
Tensor<T> Tape<T>::zeros(Shape shape) {
  const auto n = numel(shape);
  return constant(std::move(shape), std::vector<T>(n, T(0)));
}

template <class T>
Tensor<T> Tape<T>::variable(Shape shape, std::vector<T> values) {
  return Tensor<T>(push(std::move(shape), std::move(values), "variable", true));
}

template <class T>
Tensor<T> Tape<T>::param(const ParamStore<T>& store, std::size_t index) {
  if (param_store_ != nullptr && param_store_ != &store) {
    throw std::logic_error("a tape may only bind parameters of one ParamStore");
  }
  if (param_store_ == nullptr) {
    param_store_ = &store;
    param_nodes_.assign(store.count(), nullptr);
  }
  if (param_nodes_[index] == nullptr) {
    const auto& info = store.info(index);
    auto v = store.values(index);
    Node<T>* n = push(info.shape, std::vector<T>(v.begin(), v.end()), "param", true);
    n->param_offset = static_cast<std::ptrdiff_t>(info.offset);
    param_nodes_[index] = n;
  }
  return Tensor<T>(param_nodes_[index]);
}

template <class T>
Tensor<T> Tape<T>::param(const ParamStore<T>& store, const std::string& name) {
  return param(store, store.index_of(name));
}

template <class T>
void Tape<T>::check_finite(const Node<T>& n) const {
  for (const T& v : n.value) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by op '") + n.op + "'");
  }
}

template <class T>
Tensor<T> Tape<T>::record(const char* op, Shape shape, std::vector<T> value,
                          const std::vector<Tensor<T>>& inputs, std::function<void(Node<T>&)> backward) {
  bool rg = false;
  for (const auto& in : inputs) rg = rg || in.requires_grad();
  Node<T>* n = push(std::move(shape), std::move(value), op, rg);
  ++op_count_;
  if (checked) check_finite(*n);
  if (rg && backward) {
    n->backward = [n, bw = std::move(backward)]() { bw(*n); };
  }
  return Tensor<T>(n);
}

template <class T>
Tensor<T> Tape<T>::record(const char* op, Shape shape, std::vector<T> value,
                          std::initializer_list<Tensor<T>> inputs, std::function<void(Node<T>&)> backward) {
  return record(op, std::move(shape), std::move(value), std::vector<Tensor<T>>(inputs), std::move(backward));
}

template <class T>
void Tape<T>::backward(Tensor<T> loss) {
  if (loss.numel() != 1) throw ShapeError("backward() needs a scalar loss, got " + to_string(loss.shape()));
  if (!loss.requires_grad()) return;
  for (auto& n : nodes_) {
    if (n->requires_grad) std::fill(n->grad.begin(), n->grad.end(), T(0));
  }
  loss.node()->grad[0] = T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if ((*it)->backward) (*it)->backward();
  }
  if (!sink_.empty()) {
    for (Node<T>* p : param_nodes_) {
      if (p == nullptr) continue;
      T* dst = sink_.data() + p->param_offset;
      for (std::size_t i = 0; i < p->grad.size(); ++i) dst[i] += p->grad[i];
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

// ---------------------------------------------------------------------------

const char* group_name(ParamGroup g) noexcept {
  switch (g) {
    case ParamGroup::kHidden:
      return "hidden";
    case ParamGroup::kAttention:
      return "attn";
    case ParamGroup::kFusion:
      return "fusion";
  }
  return "?";
}

template <class T>
std::size_t ParamStore<T>::add(std::string name, Shape shape, ParamGroup group) {
  if (by_name_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  ParamInfo info;
  info.name = name;
  info.shape = std::move(shape);
  info.size = numel(info.shape);
  info.offset = values_.size();
  info.group = group;
  values_.resize(values_.size() + info.size, T(0));
  grads_.resize(values_.size(), T(0));
  by_name_[name] = infos_.size();
  infos_.push_back(std::move(info));
  return infos_.size() - 1;
}

template <class T>
std::size_t ParamStore<T>::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

template <class T>
void ParamStore<T>::zero_grads() {
  std::fill(grads_.begin(), grads_.end(), T(0));
  has_grads_ = false;
}

template <class T>
void ParamStore<T>::accumulate_grads(std::span<const T> g, T scale) {
  if (g.size() != grads_.size()) throw ShapeError("accumulate_grads: flat gradient size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) grads_[i] += scale * g[i];
  has_grads_ = true;
}

template <class T>
std::size_t ParamStore<T>::group_size(ParamGroup g) const {
  std::size_t n = 0;
  for (const auto& info : infos_) {
    if (info.group == g) n += info.size;
  }
  return n;
}

template <class T>
std::vector<uint8_t> ParamStore<T>::group_mask(std::span<const ParamGroup> groups) const {
  std::vector<uint8_t> mask(values_.size(), 0);
  for (const auto& info : infos_) {
    bool on = false;
    for (auto g : groups) on = on || info.group == g;
    if (on) std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(info.offset), info.size, uint8_t{1});
  }
  return mask;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace gnosis::ad
