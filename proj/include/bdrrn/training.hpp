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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdrrn/data_io.hpp"
#include "bdrrn/model.hpp"
#include "bdrrn/optim.hpp"
#include "bdrrn/partition.hpp"

namespace bdrrn {

struct TrainConfig {
  double base_lr = 5e-4;
  int batch_size = 256;
  int epochs = 150;
  uint64_t seed = 0;
  int eval_every = 0;           // epochs between held-out evaluations; 0 disables
  std::string checkpoint_path;  // empty: no checkpoint files

  void validate() const;
};

struct StepRecord {
  int64_t step;
  int epoch;
  double loss;
};

struct EpochRecord {
  int epoch;
  double mean_loss;
  double seconds;  // wall clock, informational only
};

struct EvalRecord {
  int epoch;
  double psnr_decoded;
  double psnr_enhanced;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<EvalRecord> evals;

  // `step,epoch,loss` and `epoch,eval_psnr_decoded,eval_psnr_enhanced`.
  std::string steps_csv() const;
  std::string evals_csv() const;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int64_t step) : Error(what), step_(step) {}
  int64_t step() const { return step_; }

 private:
  int64_t step_;
};

// Whole frame for evaluation, with its coding partition.
struct EvalFrame {
  Plane8 decoded;
  Plane8 original;
  FramePartition partition;
};

// Network-space tensors ([n,1,h,w], pixels / 255).
Tensor plane_to_tensor(const Plane8& plane);
Tensor mask_to_tensor(const MeanMask& mask);
Tensor batch_tensor(std::span<const PatchPair* const> batch, int which);  // 0 decoded, 1 original, 2 mask

// Round, clamp to [0,255] and quantise one [1,1,h,w] network output.
Plane8 tensor_to_plane(const Tensor& t);

// Whole-frame inference. The partition is required for Bdrrn and ignored by Drrn.
Plane8 enhance_frame(const Model& model, const Plane8& decoded, const FramePartition* partition);

struct EvalRow {
  int frame = 0;
  double psnr_decoded = 0.0;
  double psnr_enhanced = 0.0;
  double delta() const { return psnr_enhanced - psnr_decoded; }
};

struct EvalTable {
  std::vector<EvalRow> rows;
  double mean_psnr_decoded() const;
  double mean_psnr_enhanced() const;
  double mean_delta() const;
  std::string to_text() const;
};

// Eval-mode, whole frames; throws if running statistics are unavailable.
EvalTable evaluate(const Model& model, std::span<const EvalFrame> frames);

using StepCallback = std::function<void(const StepRecord&)>;

// Seeded-shuffle minibatch Adam on mse(forward(decoded, mask), original).
// Partial trailing batches are dropped. Throws TrainingError on a non-finite
// loss and InputError when the dataset is smaller than one batch.
TrainLog train(Model& model, std::span<const PatchPair> patches, const TrainConfig& cfg,
               std::span<const EvalFrame> held_out = {}, const StepCallback& on_step = {});

}  // namespace bdrrn
