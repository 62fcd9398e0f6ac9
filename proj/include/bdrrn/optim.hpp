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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bdrrn/tensor.hpp"

namespace bdrrn {

struct Parameter {
  std::string name;
  Tensor value;
  double lr_scale = 1.0;
};

// Named parameters in bytewise name order. Each entry is owned exactly once;
// network positions that share weights hold handles to the same entry.
class ParameterRegistry {
 public:
  Parameter& add(std::string name, Tensor value, double lr_scale = 1.0);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  const Tensor& tensor(const std::string& name) const { return at(name).value; }

  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }
  int64_t element_count() const;

  void zero_grads();

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, Parameter> entries_;
};

struct AdamState {
  double base_lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int64_t step = 0;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
};

// Bias-corrected Adam with per-parameter rate base_lr * lr_scale.
// Throws if any registered parameter has no gradient.
void adam_step(ParameterRegistry& registry, AdamState& state);

}  // namespace bdrrn
