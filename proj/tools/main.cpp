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

// bdrrn: command-line front end for mask rendering, synthetic degradation,
// dataset building, training, enhancement and evaluation.
//
// Exit codes: 0 success, 1 usage, 2 input/validation, 3 internal.

#include <CLI11.hpp>
#include <iostream>

#include "bdrrn/error.hpp"
#include "commands.hpp"

namespace {

using namespace bdrrn::cli;

void add_model_flags(CLI::App* cmd, ModelArgs& m, bool iters_flag = true) {
  cmd->add_option("--variant", m.variant, "drrn or bdrrn")->check(CLI::IsMember({"drrn", "bdrrn"}));
  cmd->add_option("--fusion", m.fusion, "add or concat (bdrrn only)")->check(CLI::IsMember({"add", "concat"}));
  cmd->add_option("--channels", m.channels, "feature channels")->capture_default_str();
  if (iters_flag) cmd->add_option("--iters", m.iters, "main,extra,merge recursion counts")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-information guided recursive residual network for compressed video enhancement"};
  app.require_subcommand(1);

  MaskArgs mask;
  auto* c_mask = app.add_subcommand("mask", "render the mean mask of a decoded frame as 8-bit PGM");
  c_mask->add_option("--decoded", mask.decoded, "decoded frame (.pgm or raw .yuv)")->required();
  c_mask->add_option("--partition", mask.partition, "BPART partition file")->required();
  c_mask->add_option("--out", mask.out, "output PGM")->required();
  c_mask->add_option("--frame", mask.frame, "frame index")->capture_default_str();
  c_mask->add_option("--yuv-dims", mask.yuv_dims, "WxH when --decoded is raw YUV 4:2:0");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "partition-aligned synthetic degradation of a raw YUV clip");
  c_synth->add_option("--original", synth.original, "raw YUV 4:2:0 input")->required();
  c_synth->add_option("--dims", synth.dims, "WxH")->required();
  c_synth->add_option("--frames", synth.frames, "frames to process")->capture_default_str();
  c_synth->add_option("--qstep", synth.qstep, "quantiser step")->capture_default_str();
  c_synth->add_option("--split-prob", synth.split_prob, "quadtree split probability")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "random seed")->capture_default_str();
  c_synth->add_option("--out-decoded", synth.out_decoded, "degraded YUV output")->required();
  c_synth->add_option("--out-partition", synth.out_partition, "BPART output")->required();

  DatasetArgs dataset;
  auto* c_dataset = app.add_subcommand("dataset", "build the 64x64 patch dataset for one QP");
  c_dataset->add_option("--manifest", dataset.manifest, "manifest file")->required();
  c_dataset->add_option("--qp", dataset.qp, "22, 27, 32 or 37")->capture_default_str();
  c_dataset->add_option("--seed", dataset.seed, "frame selection seed")->capture_default_str();
  c_dataset->add_option("--frames-per-clip", dataset.frames_per_clip, "frames sampled per clip")->capture_default_str();
  c_dataset->add_option("--dump-dir", dataset.dump_dir, "write every patch as PGM triples here");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train a model on a manifest for one QP");
  c_train->add_option("--manifest", train.manifest, "manifest file")->required();
  add_model_flags(c_train, train.model);
  c_train->add_option("--qp", train.qp, "22, 27, 32 or 37")->capture_default_str();
  c_train->add_option("--epochs", train.epochs, "epochs")->capture_default_str();
  c_train->add_option("--batch", train.batch, "minibatch size")->capture_default_str();
  c_train->add_option("--lr", train.lr, "base learning rate")->capture_default_str();
  c_train->add_option("--seed", train.seed, "seed for init, frame selection and shuffling")->capture_default_str();
  c_train->add_option("--frames-per-clip", train.frames_per_clip, "frames sampled per clip")->capture_default_str();
  c_train->add_option("--eval-every", train.eval_every, "epochs between held-out evaluations (0 = off)")
      ->capture_default_str();
  c_train->add_option("--out", train.out, "checkpoint path; logs go to <out>.steps.csv / <out>.evals.csv")->required();

  EnhanceArgs enhance;
  auto* c_enhance = app.add_subcommand("enhance", "whole-frame enhancement of decoded video");
  c_enhance->add_option("--ckpt", enhance.ckpt, "checkpoint")->required();
  c_enhance->add_option("--decoded", enhance.decoded, "decoded input (.pgm or raw .yuv)")->required();
  c_enhance->add_option("--partition", enhance.partition, "BPART file (bdrrn checkpoints)");
  c_enhance->add_option("--out", enhance.out, "output, same format as input")->required();
  c_enhance->add_option("--dims", enhance.dims, "WxH for raw YUV");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "per-frame PSNR of decoded vs enhanced frames");
  c_eval->add_option("--ckpt", eval.ckpt, "checkpoint")->required();
  c_eval->add_option("--manifest", eval.manifest, "manifest file")->required();
  c_eval->add_option("--qp", eval.qp, "22, 27, 32 or 37")->capture_default_str();

  ModelArgs params;
  auto* c_params = app.add_subcommand("params", "learnable parameter count and per-layer table");
  add_model_flags(c_params, params);

  BdrateArgs bdrate;
  auto* c_bdrate = app.add_subcommand("bdrate", "Bjontegaard BD-rate of test RD curves against an anchor");
  c_bdrate->add_option("--anchor", bdrate.anchor, "anchor RD file")->required();
  c_bdrate->add_option("--test", bdrate.tests, "test RD file(s)")->required();
  c_bdrate->add_flag("--csv", bdrate.csv, "CSV instead of an aligned table");

  GradcheckArgs grad;
  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
  add_model_flags(c_grad, grad.model);
  c_grad->add_option("--size", grad.size, "HxW of the random input")->capture_default_str();
  c_grad->add_option("--seed", grad.seed, "seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*c_mask) return cmd_mask(mask);
    if (*c_synth) return cmd_synth(synth);
    if (*c_dataset) return cmd_dataset(dataset);
    if (*c_train) return cmd_train(train);
    if (*c_enhance) return cmd_enhance(enhance);
    if (*c_eval) return cmd_eval(eval);
    if (*c_params) return cmd_params(params);
    if (*c_bdrate) return cmd_bdrate(bdrate);
    if (*c_grad) return cmd_gradcheck(grad);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.message << '\n';
    return 1;
  } catch (const bdrrn::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
