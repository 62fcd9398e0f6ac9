/* Copyright 2026 The bdrrn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "bdrrn/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "bdrrn/error.hpp"

namespace bdrrn {

std::string Shape::str() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + "]";
}

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative dimension in shape " + shape.str());
  }
  if (static_cast<int64_t>(data.size()) != shape.numel()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape.str());
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  node->leaf = true;
  return node;
}

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw Error("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(shape, 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  if (shape.numel() < 0) throw ShapeError("negative dimension in shape " + shape.str());
  return Tensor(make_leaf(shape, std::vector<double>(static_cast<size_t>(shape.numel()), value),
                          requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(make_leaf(shape, std::move(data), requires_grad));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::span<const double> Tensor::data() const { return checked(node_).data; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  if (!node_->leaf) throw Error("only leaf tensors may be mutated");
  return node_->data;
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::is_leaf() const { return checked(node_).leaf; }
bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw Error("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
  return node_->data[0];
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw ShapeError("backward without an upstream gradient needs a one-element loss, got " +
                     loss.shape().str());
  }
  const double one = 1.0;
  backward(loss, std::span<const double>(&one, 1));
}

void backward(const Tensor& root, std::span<const double> upstream) {
  if (!root.defined()) throw Error("backward on an undefined tensor");
  const auto& root_node = root.node();
  if (!root_node->requires_grad) {
    throw Error("backward on a tensor that is not part of a differentiable graph");
  }
  if (static_cast<int64_t>(upstream.size()) != root.numel()) {
    throw ShapeError("upstream gradient length does not match " + root.shape().str());
  }

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, size_t>> stack;
  stack.emplace_back(root_node.get(), 0);
  visited.insert(root_node.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* node : order) {
    if (!node->leaf) node->grad.assign(node->data.size(), 0.0);
  }
  auto& root_grad = root_node->grad_buffer();
  for (size_t i = 0; i < upstream.size(); ++i) root_grad[i] += upstream[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward) node->backward(*node);
  }
  for (detail::Node* node : order) {
    if (!node->leaf) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

void zero_grads(std::span<Tensor> tensors) {
  for (auto& t : tensors) t.zero_grad();
}

}  // namespace bdrrn
