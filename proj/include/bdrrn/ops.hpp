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

#include "bdrrn/tensor.hpp"

namespace bdrrn {

// 3x3 convolution, stride 1, zero padding 1.
// input [n,cin,h,w], weight [cout,cin,3,3], bias [cout,1,1,1] -> [n,cout,h,w]
Tensor conv3x3(const Tensor& input, const Tensor& weight, const Tensor& bias);

// max(0, x); derivative taken as 0 at x == 0.
Tensor relu(const Tensor& input);

// Hash of the sign pattern (x > 0) of every relu() input evaluated on this
// thread while the probe is alive, in call order. Probes do not nest.
class ReluPatternProbe {
 public:
  ReluPatternProbe();
  ~ReluPatternProbe();
  ReluPatternProbe(const ReluPatternProbe&) = delete;
  ReluPatternProbe& operator=(const ReluPatternProbe&) = delete;

  uint64_t fingerprint() const { return hash_; }
  void reset() { hash_ = kOffset; }
  void record(std::span<const double> values);

 private:
  static constexpr uint64_t kOffset = 0xcbf29ce484222325ULL;
  uint64_t hash_ = kOffset;
};

Tensor add(const Tensor& a, const Tensor& b);

// [n,ca,h,w] ++ [n,cb,h,w] -> [n,ca+cb,h,w], channels of a first.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Copies channels [begin, end) into a new leaf without gradient tracking.
Tensor channel_slice(const Tensor& input, int64_t begin, int64_t end);

// Mean of squared differences; target must not require a gradient.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

enum class BatchNormMode { Train, Eval };

struct BatchNormStats {
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kDecay = 0.9;

  double running_mean = 0.0;
  double running_var = 1.0;
  bool available = false;  // set by a Train-mode pass or by a checkpoint load
};

// Single-channel input batch normalisation with scalar gamma/beta ([1,1,1,1]).
// Train mode normalises with the biased batch variance over (n,h,w) and
// folds the batch statistics into `stats`.
Tensor batchnorm_input(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                       BatchNormStats& stats, BatchNormMode mode);

// Eval-mode form that never touches the statistics.
Tensor batchnorm_input(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                       const BatchNormStats& stats);

}  // namespace bdrrn
