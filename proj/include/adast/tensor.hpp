// Copyright 2026 The AdaST-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "adast/errors.hpp"

namespace adast {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Graph recording is on by default; NoGradGuard disables it for the current thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  T* grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad.data();
  }
};

}  // namespace detail

// Dense row-major tensor with optional gradient tracking. Copies are shallow:
// two Tensor handles may refer to the same storage and graph node.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodeType = detail::Node<T>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }
  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
  }
  static Tensor scalar(T value) { return Tensor({}, {value}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  // Negative axes count from the end.
  std::size_t dim(std::ptrdiff_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  // Direct storage access for optimizers and test hooks. Does not record a graph edge.
  std::span<T> mutable_data() { return node_->data; }
  T item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool value);
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return {node_->grad_buffer(), node_->data.size()}; }
  void zero_grad();

  // Deep copy of the values without graph history.
  Tensor detach() const;
  Tensor reshaped(Shape shape) const;  // shares nothing; see ops::reshape for the tracked form

  // Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls.
  void backward() const;

  const std::shared_ptr<NodeType>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<NodeType> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<NodeType> node_;
};

// Build an op result. Records `backward_fn` only when recording is enabled and
// some input requires grad.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(detail::Node<T>&)> backward_fn);

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace adast
