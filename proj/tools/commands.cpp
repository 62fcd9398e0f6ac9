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

#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "bdrrn/data_io.hpp"
#include "bdrrn/gradcheck.hpp"
#include "bdrrn/metrics.hpp"
#include "bdrrn/model.hpp"
#include "bdrrn/partition.hpp"
#include "bdrrn/training.hpp"

namespace bdrrn::cli {

namespace fs = std::filesystem;

Dims parse_dims(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    size_t used_w = 0, used_h = 0;
    const std::string ws = text.substr(0, x), hs = text.substr(x + 1);
    Dims d{std::stoi(ws, &used_w), std::stoi(hs, &used_h)};
    if (used_w != ws.size() || used_h != hs.size() || d.width <= 0 || d.height <= 0) {
      throw std::invalid_argument(text);
    }
    return d;
  } catch (const std::exception&) {
    throw UsageError{"expected dimensions as WxH, got '" + text + "'"};
  }
}

namespace {

bool is_pgm(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm";
}

ModelConfig model_config(const ModelArgs& args) {
  ModelConfig cfg;
  if (args.variant == "drrn") {
    cfg.variant = Variant::Drrn;
    if (args.fusion) throw UsageError{"--fusion applies only to --variant bdrrn"};
  } else if (args.variant == "bdrrn") {
    cfg.variant = Variant::Bdrrn;
    const std::string fusion = args.fusion.value_or("add");
    if (fusion == "add") cfg.fusion = Fusion::Add;
    else if (fusion == "concat") cfg.fusion = Fusion::Concat;
    else throw UsageError{"--fusion must be add or concat"};
  } else {
    throw UsageError{"--variant must be drrn or bdrrn"};
  }
  cfg.channels = args.channels;
  std::vector<int> iters;
  std::stringstream ss(args.iters);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      iters.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw UsageError{"--iters expects M,E,G integers, got '" + args.iters + "'"};
    }
  }
  if (iters.size() != 3) throw UsageError{"--iters expects three values M,E,G"};
  cfg.main_iters = iters[0];
  cfg.extra_iters = iters[1];
  cfg.merge_iters = iters[2];
  cfg.validate();
  for (const auto& w : cfg.warnings()) std::cerr << "warning: " << w << '\n';
  return cfg;
}

}  // namespace

int cmd_mask(const MaskArgs& args) {
  Plane8 decoded;
  if (is_pgm(args.decoded)) {
    decoded = read_pgm(args.decoded);
  } else {
    if (args.yuv_dims.empty()) throw UsageError{"--yuv-dims is required for raw YUV input"};
    const Dims d = parse_dims(args.yuv_dims);
    auto planes = read_yuv420_y(args.decoded, d.width, d.height, args.frame + 1);
    if (static_cast<int>(planes.size()) <= args.frame) {
      throw InputError("'" + args.decoded + "' has no frame " + std::to_string(args.frame));
    }
    decoded = std::move(planes[static_cast<size_t>(args.frame)]);
  }
  const BpartFile bpart = read_partition_file(args.partition);
  if (args.frame < 0 || args.frame >= static_cast<int>(bpart.frames.size())) {
    throw InputError("'" + args.partition + "' has no frame " + std::to_string(args.frame));
  }
  const MeanMask mask = mean_mask(decoded, bpart.frames[static_cast<size_t>(args.frame)]);
  write_pgm(quantize_mask(mask), args.out);
  std::cout << "wrote " << mask.width << "x" << mask.height << " mean mask to " << args.out << '\n';
  return 0;
}

int cmd_synth(const SynthArgs& args) {
  if (args.qstep < 1) throw InputError("--qstep must be >= 1");
  if (args.frames < 1) throw InputError("--frames must be >= 1");
  const Dims d = parse_dims(args.dims);
  auto frames = read_yuv420(args.original, d.width, d.height, args.frames);
  if (static_cast<int>(frames.size()) < args.frames) {
    throw InputError("'" + args.original + "' holds only " + std::to_string(frames.size()) + " frames");
  }
  BpartFile bpart{1, d.width, d.height, {}};
  for (size_t i = 0; i < frames.size(); ++i) {
    FramePartition p = random_quadtree(clip_seed(args.seed, i, 0), d.width, d.height, args.split_prob);
    frames[i].luma = synth_degrade(frames[i].luma, p, args.qstep);
    bpart.frames.push_back(std::move(p));
  }
  write_yuv420(args.out_decoded, frames);
  write_partition_file(args.out_partition, bpart);
  std::cout << "degraded " << frames.size() << " frame(s) with qstep " << args.qstep << '\n';
  return 0;
}

int cmd_dataset(const DatasetArgs& args) {
  const auto manifest = read_manifest(args.manifest);
  DatasetOptions opts;
  opts.qp = args.qp;
  opts.seed = args.seed;
  opts.frames_per_clip = args.frames_per_clip;
  const auto patches = build_patch_dataset(manifest, opts);
  if (patches.empty()) throw InputError("no patches for qp " + std::to_string(args.qp));
  if (!args.dump_dir.empty()) {
    fs::create_directories(args.dump_dir);
    for (size_t i = 0; i < patches.size(); ++i) {
      const auto& p = patches[i];
      std::ostringstream stem;
      stem << std::setw(6) << std::setfill('0') << i;
      const fs::path base = fs::path(args.dump_dir) / stem.str();
      write_pgm(p.decoded, base.string() + "_decoded.pgm");
      write_pgm(p.original, base.string() + "_original.pgm");
      write_pgm(quantize_mask(MeanMask{p.decoded.width, p.decoded.height, p.mask}), base.string() + "_mask.pgm");
    }
  }
  std::cout << "qp " << args.qp << ": " << patches.size() << " patches of " << opts.patch_size << "x"
            << opts.patch_size << '\n';
  return 0;
}

namespace {

struct ClipFrames {
  std::vector<Plane8> original;
  std::vector<Plane8> decoded;
  BpartFile partition;
};

ClipFrames load_clip(const ManifestEntry& e) {
  check_manifest_entry(e);
  ClipFrames c;
  c.original = read_yuv420_y(e.original_path, e.width, e.height, e.frames);
  c.decoded = read_yuv420_y(e.decoded_path, e.width, e.height, e.frames);
  c.partition = read_partition_file(e.partition_path);
  if (c.partition.width != e.width || c.partition.height != e.height ||
      static_cast<int>(c.partition.frames.size()) < e.frames) {
    throw InputError("'" + e.partition_path + "' does not match its manifest entry");
  }
  return c;
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  const ModelConfig cfg = model_config(args.model);
  const auto manifest = read_manifest(args.manifest);
  DatasetOptions opts;
  opts.qp = args.qp;
  opts.seed = args.seed;
  opts.frames_per_clip = args.frames_per_clip;
  const auto patches = build_patch_dataset(manifest, opts);
  if (patches.empty()) throw InputError("manifest yields no training patches for qp " + std::to_string(args.qp));

  // Held-out evaluation uses the frames the selector did not pick.
  std::vector<EvalFrame> held_out;
  if (args.eval_every > 0) {
    for (size_t clip = 0; clip < manifest.size(); ++clip) {
      const auto& e = manifest[clip];
      if (e.qp != args.qp) continue;
      const auto chosen = select_frames(clip_seed(args.seed, clip, e.qp), e.frames,
                                        std::min(args.frames_per_clip, e.frames));
      ClipFrames c = load_clip(e);
      for (int f = 0; f < e.frames; ++f) {
        if (std::find(chosen.begin(), chosen.end(), f) != chosen.end()) continue;
        held_out.push_back(EvalFrame{c.decoded[static_cast<size_t>(f)], c.original[static_cast<size_t>(f)],
                                     c.partition.frames[static_cast<size_t>(f)]});
      }
    }
  }

  TrainConfig tc;
  tc.base_lr = args.lr;
  tc.batch_size = args.batch;
  tc.epochs = args.epochs;
  tc.seed = args.seed;
  tc.eval_every = args.eval_every;
  tc.checkpoint_path = args.out;

  Model model(cfg, args.seed);
  std::cout << "training " << describe(cfg) << " (" << model.param_count() << " parameters) on "
            << patches.size() << " patches\n";
  int last_epoch = -1;
  const TrainLog log = train(model, patches, tc, held_out, [&](const StepRecord& r) {
    if (r.epoch != last_epoch) {
      last_epoch = r.epoch;
      std::cout << "epoch " << r.epoch << " step " << r.step << " loss " << std::setprecision(6) << r.loss << '\n';
    }
  });

  std::ofstream(args.out + ".steps.csv") << log.steps_csv();
  if (!log.evals.empty()) std::ofstream(args.out + ".evals.csv") << log.evals_csv();
  std::cout << "final epoch mean loss " << std::setprecision(6) << log.epochs.back().mean_loss << "\nwrote "
            << args.out << '\n';
  return 0;
}

int cmd_enhance(const EnhanceArgs& args) {
  const Model model = load_checkpoint(args.ckpt);
  const bool needs_mask = model.config().uses_mask();
  if (needs_mask && args.partition.empty()) {
    throw InputError("checkpoint is " + describe(model.config()) + ", which needs --partition");
  }
  if (!needs_mask && !args.partition.empty()) {
    std::cerr << "warning: drrn checkpoint ignores --partition\n";
  }
  std::optional<BpartFile> bpart;
  if (needs_mask) bpart = read_partition_file(args.partition);
  auto partition_for = [&](size_t frame, const Plane8& plane) -> const FramePartition* {
    if (!bpart) return nullptr;
    if (frame >= bpart->frames.size()) {
      throw InputError("'" + args.partition + "' has no frame " + std::to_string(frame));
    }
    const auto& p = bpart->frames[frame];
    if (p.width != plane.width || p.height != plane.height) {
      throw InputError("partition is " + std::to_string(p.width) + "x" + std::to_string(p.height) + " but frame is " +
                       std::to_string(plane.width) + "x" + std::to_string(plane.height));
    }
    return &p;
  };

  if (is_pgm(args.decoded)) {
    const Plane8 decoded = read_pgm(args.decoded);
    write_pgm(enhance_frame(model, decoded, partition_for(0, decoded)), args.out);
    std::cout << "enhanced 1 frame\n";
    return 0;
  }
  if (args.dims.empty()) throw UsageError{"--dims is required for raw YUV input"};
  const Dims d = parse_dims(args.dims);
  auto frames = read_yuv420(args.decoded, d.width, d.height);
  for (size_t i = 0; i < frames.size(); ++i) {
    frames[i].luma = enhance_frame(model, frames[i].luma, partition_for(i, frames[i].luma));
  }
  write_yuv420(args.out, frames);
  std::cout << "enhanced " << frames.size() << " frame(s)\n";
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  const Model model = load_checkpoint(args.ckpt);
  const auto manifest = read_manifest(args.manifest);
  std::vector<EvalFrame> frames;
  for (const auto& e : manifest) {
    if (e.qp != args.qp) continue;
    ClipFrames c = load_clip(e);
    for (int f = 0; f < e.frames; ++f) {
      frames.push_back(EvalFrame{c.decoded[static_cast<size_t>(f)], c.original[static_cast<size_t>(f)],
                                 c.partition.frames[static_cast<size_t>(f)]});
    }
  }
  if (frames.empty()) throw InputError("manifest has no entries for qp " + std::to_string(args.qp));
  std::cout << evaluate(model, frames).to_text();
  return 0;
}

int cmd_params(const ModelArgs& args) {
  const ModelConfig cfg = model_config(args);
  const Model model(cfg, 0);
  std::cout << describe(cfg) << '\n';
  for (const auto& l : layer_counts(cfg)) {
    std::cout << "  " << std::left << std::setw(10) << l.name << std::right << std::setw(10) << l.count << '\n';
  }
  std::cout << "total: " << model.param_count() << '\n';
  if (cfg.variant == Variant::Bdrrn) {
    ModelConfig base = cfg;
    base.variant = Variant::Drrn;
    std::cout << "Δ vs drrn: " << model.param_count() - param_count(base) << '\n';
  }
  return 0;
}

int cmd_bdrate(const BdrateArgs& args) {
  std::vector<MethodCurves> methods;
  std::set<std::string> names;
  auto unique_name = [&](const std::string& path) {
    std::string base = fs::path(path).stem().string();
    std::string name = base;
    for (int k = 2; names.count(name); ++k) name = base + "#" + std::to_string(k);
    names.insert(name);
    return name;
  };
  methods.push_back(MethodCurves{unique_name(args.anchor), read_rd_file(args.anchor)});
  const std::string anchor = methods.front().method;
  for (const auto& t : args.tests) methods.push_back(MethodCurves{unique_name(t), read_rd_file(t)});
  const RdReport report = rd_report(methods, anchor);
  std::cout << (args.csv ? report.to_csv() : report.to_text());
  for (const auto& r : report.rows) {
    if (!r.bd_rate_percent) return 2;
  }
  return 0;
}

int cmd_gradcheck(const GradcheckArgs& args) {
  GradCheckOptions opts;
  opts.config = model_config(args.model);
  const Dims d = parse_dims(args.size);
  opts.width = d.width;
  opts.height = d.height;
  opts.seed = args.seed;
  const GradCheckResult r = gradient_check(opts);
  std::cout << describe(opts.config) << " on " << d.width << "x" << d.height << ": checked " << r.elements_checked
            << " parameter elements, skipped " << r.elements_skipped << " straddling a ReLU kink\n"
            << "max relative error " << std::scientific << std::setprecision(3) << r.max_relative_error << " at "
            << r.worst_parameter << "[" << r.worst_index << "] (analytic " << r.worst_analytic << ", numeric "
            << r.worst_numeric << ")\n";
  if (!(r.max_relative_error < args.tolerance)) {
    std::cerr << "gradient check failed: error above " << args.tolerance << '\n';
    return 3;
  }
  return 0;
}

}  // namespace bdrrn::cli
