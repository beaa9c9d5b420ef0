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

#include "adast/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace adast {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " elements but " +
                         std::to_string(data.size()) + " values were given");
  }
  node_ = std::make_shared<NodeType>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
std::size_t Tensor<T>::dim(std::ptrdiff_t axis) const {
  const auto r = static_cast<std::ptrdiff_t>(rank());
  const std::ptrdiff_t a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape()));
  }
  return node_->shape[static_cast<std::size_t>(a)];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
  }
  return node_->data[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
  if (!node_->is_leaf() && !value) {
    throw ContractError("cannot clear requires_grad on a non-leaf tensor");
  }
  node_->requires_grad = value;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data, false);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  return Tensor(std::move(shape), node_->data, false);
}

template <typename T>
void Tensor<T>::backward() const {
  if (!node_ || numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (node_ ? shape_to_string(shape()) : std::string("<undefined>")));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<NodeType*> order;
  std::unordered_set<NodeType*> visited;
  std::vector<std::pair<NodeType*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeType* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are rebuilt each sweep; only leaves accumulate.
  for (NodeType* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), T(0));
  }
  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
  }
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(detail::Node<T>&)> backward_fn) {
  Tensor<T> out(std::move(shape), std::move(data), false);
  if (!grad_enabled()) return out;
  bool any = false;
  for (const Tensor<T>* in : inputs) any = any || (in->defined() && in->requires_grad());
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const Tensor<T>* in : inputs) {
    if (in->defined()) node.parents.push_back(in->node());
  }
  node.backward_fn = std::move(backward_fn);
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(Shape, std::vector<float>, std::initializer_list<const Tensor<float>*>,
                                   std::function<void(detail::Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, std::initializer_list<const Tensor<double>*>,
                                    std::function<void(detail::Node<double>&)>);

}  // namespace adast
