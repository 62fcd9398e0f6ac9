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
#include <string>

#include "bdrrn/model.hpp"

namespace bdrrn {

struct GradCheckOptions {
  ModelConfig config{Variant::Bdrrn, Fusion::Add, 4, 9, 3, 2};
  int height = 16;
  int width = 16;
  uint64_t seed = 1;
  double step = 1e-5;
  // Gradients smaller than this are compared absolutely.
  double magnitude_floor = 1e-6;
  // Half-width of the uniform draw that replaces every conv bias; 0 keeps them.
  double bias_offset = 0.05;
  // A difference pair whose ReLU pattern differs from the base point is
  // retried this many times with the step divided by 10, then skipped.
  int step_retries = 1;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t elements_checked = 0;
  int64_t elements_skipped = 0;  // every retry straddled a ReLU kink
};

// Central finite differences of a Train-mode mse loss against the backward
// pass, for every element of every registered parameter. Conv biases are
// first redrawn from U(-bias_offset, bias_offset).
// relative error = |analytic - numeric| / max(|analytic|, |numeric|, floor).
// Difference pairs are only used when both evaluations keep the ReLU sign
// pattern of the base point.
GradCheckResult gradient_check(const GradCheckOptions& options);

}  // namespace bdrrn
