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

#include "bdrrn/error.hpp"
#include "bdrrn/ops.hpp"
#include "bdrrn/optim.hpp"
#include "bdrrn/tensor.hpp"

namespace bdrrn {

enum class Variant : uint8_t { Drrn = 0, Bdrrn = 1 };
enum class Fusion : uint8_t { Add = 0, Concat = 1 };
enum class Mode { Train, Eval };

struct ModelConfig {
  Variant variant = Variant::Bdrrn;
  Fusion fusion = Fusion::Add;  // ignored by Drrn
  int channels = 64;
  int main_iters = 9;
  int extra_iters = 3;
  int merge_iters = 2;

  // Throws InputError on channels < 1 or any iteration count < 1.
  void validate() const;
  // Soft checks; currently only the 1:3 extra/main depth ratio.
  std::vector<std::string> warnings() const;
  bool uses_mask() const { return variant == Variant::Bdrrn; }
  bool has_fuse_layer() const { return variant == Variant::Bdrrn && fusion == Fusion::Concat; }
  bool operator==(const ModelConfig&) const = default;
};

std::string to_string(Variant v);
std::string to_string(Fusion f);
std::string describe(const ModelConfig& cfg);

// Intermediate features, filled by forward() when requested.
struct ForwardTaps {
  Tensor main;    // main branch after its last recursion
  Tensor extra;   // mask branch after its last recursion (Bdrrn)
  Tensor fused;   // fusion output (Bdrrn)
  Tensor merged;  // merge branch output (Bdrrn)
};

// DRRN baseline and the mask-guided two-branch variant. Every layer that
// appears in several places is one registry entry:
//   bn.gamma/bn.beta   both input normalisations
//   conv_in.*          embedding of the decoded frame and of the mask
//   rru.c1.*, rru.c2.* every recursion in all three branches
//   fuse.*             Concat fusion only
//   recon.*            residual reconstruction, lr_scale 0.1
class Model {
 public:
  static constexpr double kReconLrScale = 0.1;
  // Gain on the He-normal draw of recon.w.
  static constexpr double kReconInitGain = 0.01;

  Model(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterRegistry& parameters() { return params_; }
  const ParameterRegistry& parameters() const { return params_; }

  BatchNormStats& input_stats() { return input_stats_; }
  const BatchNormStats& input_stats() const { return input_stats_; }
  BatchNormStats& mask_stats() { return mask_stats_; }
  const BatchNormStats& mask_stats() const { return mask_stats_; }

  // decoded and mask are [n,1,h,w] in [0,1]. Returns decoded + residual.
  // Train mode uses batch statistics and updates the running ones.
  Tensor forward(const Tensor& decoded, const std::optional<Tensor>& mask, Mode mode,
                 ForwardTaps* taps = nullptr);

  // Eval-mode forward; never mutates the model and records no graph, so it
  // may run concurrently from several threads.
  Tensor infer(const Tensor& decoded, const std::optional<Tensor>& mask) const;

  // Registry entries counted once each; running statistics excluded.
  int64_t param_count() const { return params_.element_count(); }

  // Zeroes recon weight and bias, turning the network into the identity.
  void zero_reconstruction();

 private:
  template <typename Normalize>
  Tensor run(const Tensor& decoded, const std::optional<Tensor>& mask, Normalize&& normalize,
             ForwardTaps* taps) const;

  ModelConfig config_;
  ParameterRegistry params_;
  BatchNormStats input_stats_;
  BatchNormStats mask_stats_;
};

Model build_model(const ModelConfig& cfg, uint64_t seed);

int64_t param_count(const Model& m);

// Parameter count of a configuration without materialising the weights.
int64_t param_count(const ModelConfig& cfg);

struct LayerCount {
  std::string name;
  int64_t count;
};
std::vector<LayerCount> layer_counts(const ModelConfig& cfg);

// Binary checkpoint: "BDRN", u32 version, config block, named tensors in
// bytewise name order, all little-endian. Besides the parameters it stores
// bn.input.running_{mean,var} and, for Bdrrn, bn.mask.running_{mean,var}.
class CheckpointError : public InputError {
 public:
  enum class Kind {
    Io,
    BadMagic,
    UnsupportedVersion,
    Truncated,
    TrailingData,
    BadConfig,
    ShapeMismatch,
    MissingTensor,
    UnexpectedTensor,
  };
  CheckpointError(Kind kind, const std::string& what) : InputError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& m, const std::string& path);
std::string serialize_checkpoint(const Model& m);

Model load_checkpoint(const std::string& path);
Model deserialize_checkpoint(const std::string& bytes);

// Loads into a model built for `target` instead of the stored config. Every
// parameter `target` needs must be present with a matching shape; stored
// tensors the target does not use are an error. Running statistics the file
// lacks stay unavailable.
Model load_checkpoint_as(const std::string& path, const ModelConfig& target);

}  // namespace bdrrn
