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
#include <optional>
#include <string>
#include <vector>

namespace bdrrn::cli {

// Thrown for flag combinations CLI11 cannot express; maps to exit code 1.
struct UsageError {
  std::string message;
};

struct Dims {
  int width = 0;
  int height = 0;
};
Dims parse_dims(const std::string& text);

struct MaskArgs {
  std::string decoded;
  std::string partition;
  std::string out;
  int frame = 0;
  std::string yuv_dims;
};
int cmd_mask(const MaskArgs& args);

struct SynthArgs {
  std::string original;
  std::string dims;
  int frames = 1;
  int qstep = 8;
  double split_prob = 0.5;
  uint64_t seed = 0;
  std::string out_decoded;
  std::string out_partition;
};
int cmd_synth(const SynthArgs& args);

struct DatasetArgs {
  std::string manifest;
  int qp = 22;
  uint64_t seed = 0;
  int frames_per_clip = 4;
  std::string dump_dir;
};
int cmd_dataset(const DatasetArgs& args);

struct ModelArgs {
  std::string variant = "bdrrn";
  std::optional<std::string> fusion;
  int channels = 64;
  std::string iters = "9,3,2";
};

struct TrainArgs {
  std::string manifest;
  ModelArgs model;
  int qp = 22;
  int epochs = 150;
  int batch = 256;
  double lr = 5e-4;
  uint64_t seed = 0;
  int frames_per_clip = 4;
  int eval_every = 0;
  std::string out;
};
int cmd_train(const TrainArgs& args);

struct EnhanceArgs {
  std::string ckpt;
  std::string decoded;
  std::string partition;
  std::string out;
  std::string dims;
};
int cmd_enhance(const EnhanceArgs& args);

struct EvalArgs {
  std::string ckpt;
  std::string manifest;
  int qp = 22;
};
int cmd_eval(const EvalArgs& args);

int cmd_params(const ModelArgs& args);

struct BdrateArgs {
  std::string anchor;
  std::vector<std::string> tests;
  bool csv = false;
};
int cmd_bdrate(const BdrateArgs& args);

struct GradcheckArgs {
  ModelArgs model{"bdrrn", std::nullopt, 4, "9,3,2"};
  std::string size = "16x16";
  uint64_t seed = 1;
  double tolerance = 1e-4;
};
int cmd_gradcheck(const GradcheckArgs& args);

}  // namespace bdrrn::cli
