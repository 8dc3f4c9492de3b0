// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode autodiff. A Tape owns every node created during one
// forward pass; nodes are appended in evaluation order, so backward is a
// single reverse sweep over the tape. Tensor is a non-owning handle.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gnosis::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape) noexcept;
std::string to_string(const Shape& shape);

template <class T>
class Tape;
template <class T>
class ParamStore;

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized like value iff requires_grad
  bool requires_grad = false;
  const char* op = "leaf";
  std::function<void()> backward;  // pushes this->grad into the inputs
  Tape<T>* tape = nullptr;
  // Parameter leaves: flat offset into the owning ParamStore.
  std::ptrdiff_t param_offset = -1;
};

template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Node<T>* node) : node_(node) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  std::span<const T> values() const { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  T item() const;
  bool requires_grad() const { return node_->requires_grad; }
  Tape<T>& tape() const { return *node_->tape; }
  Node<T>* node() const noexcept { return node_; }

 private:
  Node<T>* node_ = nullptr;
};

template <class T>
class Tape {
 public:
  // When true, every op result is scanned for NaN/Inf and a NumericError
  // naming the op is raised.
  bool checked = true;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor<T> constant(Shape shape, std::vector<T> values);
  Tensor<T> constant(Shape shape, std::span<const T> values);
  Tensor<T> zeros(Shape shape);
  // A differentiable leaf that is not a model parameter (used by grad_check).
  Tensor<T> variable(Shape shape, std::vector<T> values);

  // Leaf for parameter `index` of `store`; repeated calls return the same
  // node. After backward(), its gradient is added into the grad sink.
  Tensor<T> param(const ParamStore<T>& store, std::size_t index);
  Tensor<T> param(const ParamStore<T>& store, const std::string& name);

  // Flat gradient buffer (same layout as ParamStore values) that parameter
  // gradients are accumulated into. Must outlive backward().
  void set_grad_sink(std::span<T> sink) { sink_ = sink; }

  // Appends an op result. `inputs` decide requires_grad; `backward` is only
  // kept when some input requires grad.
  Tensor<T> record(const char* op, Shape shape, std::vector<T> value,
                   std::initializer_list<Tensor<T>> inputs, std::function<void(Node<T>&)> backward);
  Tensor<T> record(const char* op, Shape shape, std::vector<T> value, const std::vector<Tensor<T>>& inputs,
                   std::function<void(Node<T>&)> backward);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(Tensor<T> loss);

  std::size_t op_count() const noexcept { return op_count_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  Node<T>* push(Shape shape, std::vector<T> value, const char* op, bool requires_grad);
  void check_finite(const Node<T>& n) const;

  std::vector<std::unique_ptr<Node<T>>> nodes_;
  std::vector<Node<T>*> param_nodes_;
  const ParamStore<T>* param_store_ = nullptr;
  std::span<T> sink_;
  std::size_t op_count_ = 0;
};

}  // namespace gnosis::ad
