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

#include "bdrrn/model.hpp"

#include <cmath>
#include <random>

#include "bdrrn/error.hpp"

namespace bdrrn {

void ModelConfig::validate() const {
  if (channels < 1) throw InputError("channels must be >= 1, got " + std::to_string(channels));
  if (main_iters < 1 || extra_iters < 1 || merge_iters < 1) {
    throw InputError("iteration counts must be >= 1");
  }
  if (variant != Variant::Drrn && variant != Variant::Bdrrn) throw InputError("unknown model variant");
  if (fusion != Fusion::Add && fusion != Fusion::Concat) throw InputError("unknown fusion mode");
}

std::vector<std::string> ModelConfig::warnings() const {
  std::vector<std::string> out;
  if (variant == Variant::Bdrrn && extra_iters * 3 != main_iters) {
    out.push_back("mask branch depth " + std::to_string(extra_iters) + " is not 1/3 of main depth " +
                  std::to_string(main_iters));
  }
  return out;
}

std::string to_string(Variant v) { return v == Variant::Drrn ? "drrn" : "bdrrn"; }
std::string to_string(Fusion f) { return f == Fusion::Add ? "add" : "concat"; }

std::string describe(const ModelConfig& cfg) {
  std::string s = to_string(cfg.variant);
  if (cfg.variant == Variant::Bdrrn) s += "/" + to_string(cfg.fusion);
  s += " channels=" + std::to_string(cfg.channels) + " iters=" + std::to_string(cfg.main_iters);
  if (cfg.variant == Variant::Bdrrn) {
    s += "," + std::to_string(cfg.extra_iters) + "," + std::to_string(cfg.merge_iters);
  }
  return s;
}

std::vector<LayerCount> layer_counts(const ModelConfig& cfg) {
  cfg.validate();
  const int64_t c = cfg.channels;
  auto conv = [](int64_t cout, int64_t cin) { return cout * cin * 9 + cout; };
  std::vector<LayerCount> out{{"bn", 2}, {"conv_in", conv(c, 1)}, {"rru.c1", conv(c, c)}, {"rru.c2", conv(c, c)}};
  if (cfg.has_fuse_layer()) out.push_back({"fuse", conv(c, 2 * c)});
  out.push_back({"recon", conv(1, c)});
  return out;
}

int64_t param_count(const ModelConfig& cfg) {
  int64_t total = 0;
  for (const auto& l : layer_counts(cfg)) total += l.count;
  return total;
}

int64_t param_count(const Model& m) { return m.param_count(); }

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// He-normal weights drawn from a stream keyed by (seed, name), so a layer's
// initial values do not depend on which other layers the variant has.
Tensor he_normal(uint64_t seed, const std::string& name, int64_t cout, int64_t cin, double gain = 1.0) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(fnv1a(name)), static_cast<uint32_t>(fnv1a(name) >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> dist(0.0, gain * std::sqrt(2.0 / static_cast<double>(cin * 9)));
  Shape shape{cout, cin, 3, 3};
  std::vector<double> data(static_cast<size_t>(shape.numel()));
  for (auto& v : data) v = dist(rng);
  return Tensor::from_data(shape, std::move(data), true);
}

}  // namespace

Model::Model(const ModelConfig& cfg, uint64_t seed) : config_(cfg) {
  cfg.validate();
  const int64_t c = cfg.channels;
  auto add_conv = [&](const std::string& name, int64_t cout, int64_t cin, double lr_scale, double gain = 1.0) {
    params_.add(name + ".w", he_normal(seed, name + ".w", cout, cin, gain), lr_scale);
    params_.add(name + ".b", Tensor::zeros(Shape{cout, 1, 1, 1}, true), lr_scale);
  };
  params_.add("bn.gamma", Tensor::filled(Shape{1, 1, 1, 1}, 1.0, true));
  params_.add("bn.beta", Tensor::zeros(Shape{1, 1, 1, 1}, true));
  add_conv("conv_in", c, 1, 1.0);
  add_conv("rru.c1", c, c, 1.0);
  add_conv("rru.c2", c, c, 1.0);
  if (cfg.has_fuse_layer()) add_conv("fuse", c, 2 * c, 1.0);
  add_conv("recon", 1, c, kReconLrScale, kReconInitGain);
}

Model build_model(const ModelConfig& cfg, uint64_t seed) { return Model(cfg, seed); }

void Model::zero_reconstruction() {
  for (const char* name : {"recon.w", "recon.b"}) {
    auto data = params_.at(name).value.mutable_data();
    std::fill(data.begin(), data.end(), 0.0);
  }
}

namespace {

enum class Site { Input, Mask };

}  // namespace

template <typename Normalize>
Tensor Model::run(const Tensor& decoded, const std::optional<Tensor>& mask, Normalize&& normalize,
                  ForwardTaps* taps) const {
  const Shape& s = decoded.shape();
  if (s.c != 1) throw ShapeError("forward: decoded input must be [n,1,h,w], got " + s.str());
  if (config_.uses_mask() && !mask) throw ShapeError("forward: the bdrrn variant requires a mask");
  if (!config_.uses_mask() && mask) throw ShapeError("forward: the drrn variant takes no mask");
  if (mask && mask->shape() != s) {
    throw ShapeError("forward: mask shape " + mask->shape().str() + " differs from decoded " + s.str());
  }

  auto conv = [this](const std::string& layer, const Tensor& x) {
    return conv3x3(x, params_.tensor(layer + ".w"), params_.tensor(layer + ".b"));
  };
  // Recursive residual unit: u <- anchor + c2(relu(c1(relu(u)))), one weight pair.
  auto recurse = [&](const Tensor& anchor, int iterations) {
    Tensor u = anchor;
    for (int i = 0; i < iterations; ++i) {
      u = add(anchor, conv("rru.c2", relu(conv("rru.c1", relu(u)))));
    }
    return u;
  };

  const Tensor x0 = conv("conv_in", normalize(Site::Input, decoded));
  Tensor head = recurse(x0, config_.main_iters);
  if (taps) taps->main = head;

  if (config_.uses_mask()) {
    const Tensor y0 = conv("conv_in", normalize(Site::Mask, *mask));
    const Tensor v = recurse(y0, config_.extra_iters);
    const Tensor fused = config_.fusion == Fusion::Add ? add(head, v) : conv("fuse", relu(concat_channels(head, v)));
    head = recurse(fused, config_.merge_iters);
    if (taps) {
      taps->extra = v;
      taps->fused = fused;
      taps->merged = head;
    }
  }

  return add(decoded, conv("recon", relu(head)));
}

Tensor Model::forward(const Tensor& decoded, const std::optional<Tensor>& mask, Mode mode, ForwardTaps* taps) {
  if (mode == Mode::Eval) return run(decoded, mask, [this](Site site, const Tensor& x) {
      return batchnorm_input(x, params_.tensor("bn.gamma"), params_.tensor("bn.beta"),
                             static_cast<const BatchNormStats&>(site == Site::Input ? input_stats_ : mask_stats_));
    }, taps);
  return run(decoded, mask, [this](Site site, const Tensor& x) {
      return batchnorm_input(x, params_.tensor("bn.gamma"), params_.tensor("bn.beta"),
                             site == Site::Input ? input_stats_ : mask_stats_, BatchNormMode::Train);
    }, taps);
}

Tensor Model::infer(const Tensor& decoded, const std::optional<Tensor>& mask) const {
  NoGradGuard no_grad;
  return run(decoded, mask, [this](Site site, const Tensor& x) {
      return batchnorm_input(x, params_.tensor("bn.gamma"), params_.tensor("bn.beta"),
                             site == Site::Input ? input_stats_ : mask_stats_);
    }, nullptr);
}

}  // namespace bdrrn
