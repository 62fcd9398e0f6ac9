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

#include "bdrrn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "bdrrn/metrics.hpp"

namespace bdrrn {

void TrainConfig::validate() const {
  if (!(base_lr > 0.0)) throw InputError("base_lr must be > 0");
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (epochs < 1) throw InputError("epochs must be >= 1");
  if (eval_every < 0) throw InputError("eval_every must be >= 0");
}

std::string TrainLog::steps_csv() const {
  std::ostringstream out;
  out << "step,epoch,loss\n" << std::setprecision(17);
  for (const auto& s : steps) out << s.step << ',' << s.epoch << ',' << s.loss << '\n';
  return out.str();
}

std::string TrainLog::evals_csv() const {
  std::ostringstream out;
  out << "epoch,eval_psnr_decoded,eval_psnr_enhanced\n" << std::setprecision(10);
  for (const auto& e : evals) out << e.epoch << ',' << e.psnr_decoded << ',' << e.psnr_enhanced << '\n';
  return out.str();
}

Tensor plane_to_tensor(const Plane8& plane) {
  std::vector<double> data(plane.size());
  for (size_t i = 0; i < data.size(); ++i) data[i] = plane.pixels[i] / 255.0;
  return Tensor::from_data(Shape{1, 1, plane.height, plane.width}, std::move(data));
}

Tensor mask_to_tensor(const MeanMask& mask) {
  return Tensor::from_data(Shape{1, 1, mask.height, mask.width}, mask.values);
}

Tensor batch_tensor(std::span<const PatchPair* const> batch, int which) {
  if (batch.empty()) throw InputError("empty batch");
  const int side = batch.front()->decoded.width;
  const size_t plane = static_cast<size_t>(side) * side;
  std::vector<double> data(batch.size() * plane);
  for (size_t b = 0; b < batch.size(); ++b) {
    const PatchPair& p = *batch[b];
    double* dst = data.data() + b * plane;
    if (which == 2) {
      std::copy(p.mask.begin(), p.mask.end(), dst);
    } else {
      const auto& src = which == 0 ? p.decoded.pixels : p.original.pixels;
      for (size_t i = 0; i < plane; ++i) dst[i] = src[i] / 255.0;
    }
  }
  return Tensor::from_data(Shape{static_cast<int64_t>(batch.size()), 1, side, side}, std::move(data));
}

Plane8 tensor_to_plane(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.n != 1 || s.c != 1) throw ShapeError("tensor_to_plane expects [1,1,h,w], got " + s.str());
  Plane8 out(static_cast<int>(s.w), static_cast<int>(s.h));
  auto d = t.data();
  for (size_t i = 0; i < d.size(); ++i) {
    const double v = std::round(d[i] * 255.0);
    out.pixels[i] = static_cast<uint8_t>(std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 255.0));
  }
  return out;
}

Plane8 enhance_frame(const Model& model, const Plane8& decoded, const FramePartition* partition) {
  std::optional<Tensor> mask;
  if (model.config().uses_mask()) {
    if (!partition) throw InputError("the bdrrn variant needs a partition to build the mean mask");
    mask = mask_to_tensor(mean_mask(decoded, *partition));
  }
  return tensor_to_plane(model.infer(plane_to_tensor(decoded), mask));
}

double EvalTable::mean_psnr_decoded() const {
  double s = 0.0;
  for (const auto& r : rows) s += r.psnr_decoded;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double EvalTable::mean_psnr_enhanced() const {
  double s = 0.0;
  for (const auto& r : rows) s += r.psnr_enhanced;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double EvalTable::mean_delta() const {
  double s = 0.0;
  for (const auto& r : rows) s += r.delta();
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

std::string EvalTable::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "frame  psnr_decoded  psnr_enhanced  delta_db\n";
  for (const auto& r : rows) {
    out << std::setw(5) << r.frame << "  " << std::setw(12) << r.psnr_decoded << "  " << std::setw(13)
        << r.psnr_enhanced << "  " << std::setw(8) << r.delta() << '\n';
  }
  out << "mean   " << std::setw(12) << mean_psnr_decoded() << "  " << std::setw(13) << mean_psnr_enhanced()
      << "  " << std::setw(8) << mean_delta() << '\n';
  return out.str();
}

EvalTable evaluate(const Model& model, std::span<const EvalFrame> frames) {
  if (!model.input_stats().available || (model.config().uses_mask() && !model.mask_stats().available)) {
    throw Error("evaluate: batch-norm running statistics are not available");
  }
  EvalTable table;
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const Plane8 enhanced = enhance_frame(model, f.decoded, &f.partition);
    table.rows.push_back(EvalRow{static_cast<int>(i), psnr(f.decoded, f.original), psnr(enhanced, f.original)});
  }
  return table;
}

TrainLog train(Model& model, std::span<const PatchPair> patches, const TrainConfig& cfg,
               std::span<const EvalFrame> held_out, const StepCallback& on_step) {
  cfg.validate();
  if (patches.empty()) throw InputError("training dataset is empty");
  const size_t batch = static_cast<size_t>(cfg.batch_size);
  if (patches.size() < batch) {
    throw InputError("dataset has " + std::to_string(patches.size()) + " patches, fewer than one batch of " +
                     std::to_string(batch));
  }
  const int side = patches.front().decoded.width;
  for (const auto& p : patches) {
    if (p.decoded.width != side || p.decoded.height != side || p.original.width != side ||
        p.original.height != side || p.mask.size() != static_cast<size_t>(side) * side) {
      throw InputError("all patches must share one square size");
    }
  }

  AdamState adam;
  adam.base_lr = cfg.base_lr;
  TrainLog log;
  const size_t steps_per_epoch = patches.size() / batch;
  std::vector<size_t> order(patches.size());
  std::vector<const PatchPair*> members(batch);
  int64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), size_t{0});
    std::seed_seq seq{static_cast<uint32_t>(cfg.seed), static_cast<uint32_t>(cfg.seed >> 32),
                      static_cast<uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (size_t s = 0; s < steps_per_epoch; ++s) {
      for (size_t b = 0; b < batch; ++b) members[b] = &patches[order[s * batch + b]];
      const Tensor decoded = batch_tensor(members, 0);
      const Tensor target = batch_tensor(members, 1);
      std::optional<Tensor> mask;
      if (model.config().uses_mask()) mask = batch_tensor(members, 2);

      model.parameters().zero_grads();
      const Tensor loss = mse_loss(model.forward(decoded, mask, Mode::Train), target);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at step " + std::to_string(step), step);
      }
      backward(loss);
      adam_step(model.parameters(), adam);

      StepRecord rec{step, epoch, value};
      log.steps.push_back(rec);
      if (on_step) on_step(rec);
      epoch_loss += value;
      ++step;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log.epochs.push_back(EpochRecord{epoch, epoch_loss / static_cast<double>(steps_per_epoch), seconds});

    const bool eval_point = cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0;
    if (eval_point && !held_out.empty()) {
      const EvalTable table = evaluate(model, held_out);
      log.evals.push_back(EvalRecord{epoch, table.mean_psnr_decoded(), table.mean_psnr_enhanced()});
    }
    if (eval_point && !cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
  }
  if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
  return log;
}

}  // namespace bdrrn
