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

#include "bdrrn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "bdrrn/partition.hpp"
#include "bdrrn/training.hpp"

namespace bdrrn {

GradCheckResult gradient_check(const GradCheckOptions& options) {
  if (options.height < 1 || options.width < 1) throw InputError("gradcheck: size must be positive");
  Model model(options.config, options.seed);

  std::mt19937_64 rng(options.seed ^ 0x5eedULL);
  // Random bias offsets, so no ReLU input sits exactly on the kink.
  std::uniform_real_distribution<double> offset(-options.bias_offset, options.bias_offset);
  for (auto& [name, param] : model.parameters()) {
    if (options.bias_offset <= 0.0 || name.size() < 2 || name.compare(name.size() - 2, 2, ".b") != 0) continue;
    for (auto& v : param.value.mutable_data()) v = offset(rng);
  }
  std::uniform_int_distribution<int> pixel(0, 255);
  Plane8 decoded(options.width, options.height);
  for (auto& p : decoded.pixels) p = static_cast<uint8_t>(pixel(rng));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> target_data(decoded.size());
  for (auto& v : target_data) v = unit(rng);

  const Tensor input = plane_to_tensor(decoded);
  const Tensor target = Tensor::from_data(input.shape(), std::move(target_data));
  std::optional<Tensor> mask;
  if (options.config.uses_mask()) {
    mask = mask_to_tensor(mean_mask(decoded, random_quadtree(options.seed, options.width, options.height, 0.5)));
  }

  ReluPatternProbe probe;
  // Loss at the current parameter values and whether its ReLU pattern
  // matches the base point.
  uint64_t base_pattern = 0;
  auto loss_value = [&](bool* same_pattern) {
    NoGradGuard no_grad;
    probe.reset();
    const double v = mse_loss(model.forward(input, mask, Mode::Train), target).item();
    *same_pattern = probe.fingerprint() == base_pattern;
    return v;
  };

  model.parameters().zero_grads();
  probe.reset();
  backward(mse_loss(model.forward(input, mask, Mode::Train), target));
  base_pattern = probe.fingerprint();

  GradCheckResult result;
  for (auto& [name, param] : model.parameters()) {
    const std::vector<double> analytic(param.value.grad().begin(), param.value.grad().end());
    auto values = param.value.mutable_data();
    for (size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      std::optional<double> numeric;
      double step = options.step;
      for (int attempt = 0; attempt <= options.step_retries && !numeric; ++attempt, step /= 10.0) {
        bool up_same = false, down_same = false;
        values[i] = saved + step;
        const double up = loss_value(&up_same);
        values[i] = saved - step;
        const double down = loss_value(&down_same);
        values[i] = saved;
        if (up_same && down_same) numeric = (up - down) / (2.0 * step);
      }
      if (!numeric) {
        ++result.elements_skipped;
        continue;
      }
      const double scale = std::max({std::abs(analytic[i]), std::abs(*numeric), options.magnitude_floor});
      const double rel = std::abs(analytic[i] - *numeric) / scale;
      ++result.elements_checked;
      if (rel > result.max_relative_error || result.worst_index < 0) {
        result.max_relative_error = rel;
        result.worst_parameter = name;
        result.worst_index = static_cast<int64_t>(i);
        result.worst_analytic = analytic[i];
        result.worst_numeric = *numeric;
      }
    }
  }
  return result;
}

}  // namespace bdrrn
