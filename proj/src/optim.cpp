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

#include "bdrrn/optim.hpp"

#include <cmath>

#include "bdrrn/error.hpp"

namespace bdrrn {

Parameter& ParameterRegistry::add(std::string name, Tensor value, double lr_scale) {
  if (entries_.count(name)) throw Error("duplicate parameter name '" + name + "'");
  if (!(lr_scale > 0.0)) throw Error("parameter '" + name + "' needs lr_scale > 0");
  if (!value.is_leaf() || !value.requires_grad()) {
    throw Error("parameter '" + name + "' must be a leaf tensor that requires a gradient");
  }
  auto [it, _] = entries_.emplace(name, Parameter{name, std::move(value), lr_scale});
  return it->second;
}

Parameter& ParameterRegistry::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterRegistry::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParameterRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

int64_t ParameterRegistry::element_count() const {
  int64_t total = 0;
  for (const auto& [_, p] : entries_) total += p.value.numel();
  return total;
}

void ParameterRegistry::zero_grads() {
  for (auto& [_, p] : entries_) p.value.zero_grad();
}

void adam_step(ParameterRegistry& registry, AdamState& state) {
  for (const auto& [name, p] : registry) {
    if (!p.value.has_grad()) throw Error("adam_step: parameter '" + name + "' has no gradient");
  }
  state.step += 1;
  const auto t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (auto& [name, p] : registry) {
    auto grad = p.value.grad();
    auto values = p.value.mutable_data();
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.size() != values.size()) m.assign(values.size(), 0.0);
    if (v.size() != values.size()) v.assign(values.size(), 0.0);
    const double lr = state.base_lr * p.lr_scale;
    for (size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace bdrrn
