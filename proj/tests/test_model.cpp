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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "bdrrn/gradcheck.hpp"
#include "bdrrn/model.hpp"
#include "bdrrn/ops.hpp"
#include "oracles.hpp"

using namespace bdrrn;
namespace fs = std::filesystem;

namespace {

ModelConfig toy(Variant v, Fusion f = Fusion::Add, int channels = 4) {
  ModelConfig c;
  c.variant = v;
  c.fusion = f;
  c.channels = channels;
  return c;
}

Tensor random_input(std::mt19937_64& rng, int n, int h, int w) {
  return Tensor::from_data({n, 1, h, w}, oracle::random_values(rng, static_cast<size_t>(n) * h * w, 0.0, 1.0));
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

void set_stats(Model& m, double mean, double var) {
  for (auto* s : {&m.input_stats(), &m.mask_stats()}) {
    s->running_mean = mean;
    s->running_var = var;
    s->available = true;
  }
}

std::string temp_file(const std::string& name) {
  return (fs::temp_directory_path() / ("bdrrn_model_" + std::to_string(std::random_device{}()) + "_" + name)).string();
}

}  // namespace

TEST_CASE("default config reproduces the reference depths") {
  ModelConfig c;
  CHECK(c.channels == 64);
  CHECK(c.main_iters == 9);
  CHECK(c.extra_iters == 3);
  CHECK(c.merge_iters == 2);
  CHECK(c.warnings().empty());
  c.extra_iters = 4;
  CHECK(c.warnings().size() == 1);
  c.channels = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("parameter counts") {
  ModelConfig drrn;
  drrn.variant = Variant::Drrn;
  ModelConfig add, concat;
  concat.fusion = Fusion::Concat;
  CHECK(param_count(drrn) == 2 + 640 + 36928 + 36928 + 577);
  CHECK(param_count(drrn) == 75075);
  CHECK(param_count(add) == 75075);
  CHECK(param_count(concat) == 75075 + 64 * 128 * 9 + 64);
  CHECK(Model(concat, 0).param_count() == 148867);
  CHECK(Model(add, 0).param_count() == 75075);
}

TEST_CASE("parameter count invariance across configs") {
  for (int c : {1, 2, 7, 33}) {
    for (auto [m, e, g] : {std::array{9, 3, 2}, std::array{1, 1, 1}, std::array{5, 2, 4}}) {
      ModelConfig d{Variant::Drrn, Fusion::Add, c, m, e, g};
      ModelConfig b{Variant::Bdrrn, Fusion::Add, c, m, e, g};
      CHECK(Model(d, 1).param_count() == Model(b, 1).param_count());
    }
  }
}

TEST_CASE("parameter names and learning-rate groups") {
  Model m(toy(Variant::Bdrrn, Fusion::Concat), 0);
  CHECK(m.parameters().names() == std::vector<std::string>{"bn.beta", "bn.gamma", "conv_in.b", "conv_in.w", "fuse.b",
                                                           "fuse.w", "recon.b", "recon.w", "rru.c1.b", "rru.c1.w",
                                                           "rru.c2.b", "rru.c2.w"});
  for (const auto& [name, p] : m.parameters()) {
    CHECK(p.lr_scale == (name.rfind("recon.", 0) == 0 ? 0.1 : 1.0));
  }
  CHECK(m.parameters().tensor("rru.c1.w").shape() == Shape{4, 4, 3, 3});
  CHECK(m.parameters().tensor("fuse.w").shape() == Shape{4, 8, 3, 3});
  CHECK(m.parameters().tensor("recon.w").shape() == Shape{1, 4, 3, 3});
}

TEST_CASE("initialisation is deterministic and shared across variants") {
  Model a(toy(Variant::Bdrrn), 5), b(toy(Variant::Bdrrn), 5), d(toy(Variant::Drrn), 5), other(toy(Variant::Bdrrn), 6);
  for (const auto& name : a.parameters().names()) {
    CHECK(to_vec(a.parameters().tensor(name).data()) == to_vec(b.parameters().tensor(name).data()));
    CHECK(to_vec(a.parameters().tensor(name).data()) == to_vec(d.parameters().tensor(name).data()));
  }
  CHECK(to_vec(a.parameters().tensor("rru.c1.w").data()) != to_vec(other.parameters().tensor("rru.c1.w").data()));
  CHECK(a.parameters().tensor("bn.gamma").item() == 1.0);
  CHECK(a.parameters().tensor("bn.beta").item() == 0.0);
  for (double v : a.parameters().tensor("conv_in.b").data()) CHECK(v == 0.0);
}

TEST_CASE("zero reconstruction is the identity for every variant") {
  std::mt19937_64 rng(1);
  for (auto cfg : {toy(Variant::Drrn), toy(Variant::Bdrrn), toy(Variant::Bdrrn, Fusion::Concat)}) {
    Model m(cfg, 3);
    m.zero_reconstruction();
    auto x = random_input(rng, 2, 13, 9);
    std::optional<Tensor> mask;
    if (cfg.uses_mask()) mask = random_input(rng, 2, 13, 9);
    CHECK(to_vec(m.forward(x, mask, Mode::Train).data()) == to_vec(x.data()));
    CHECK(to_vec(m.infer(x, mask).data()) == to_vec(x.data()));
  }
}

TEST_CASE("shapes are preserved for odd sizes") {
  std::mt19937_64 rng(2);
  Model m(toy(Variant::Bdrrn, Fusion::Add, 2), 0);
  set_stats(m, 0.5, 0.08);
  for (auto [h, w] : {std::pair{64, 64}, std::pair{37, 91}, std::pair{1, 1}}) {
    auto x = random_input(rng, 1, h, w);
    CHECK(m.infer(x, x).shape() == Shape{1, 1, h, w});
  }
}

TEST_CASE("mask presence must match the variant") {
  std::mt19937_64 rng(3);
  auto x = random_input(rng, 1, 8, 8);
  Model d(toy(Variant::Drrn), 0), b(toy(Variant::Bdrrn), 0);
  CHECK_THROWS_AS(d.forward(x, x, Mode::Train), ShapeError);
  CHECK_THROWS_AS(b.forward(x, std::nullopt, Mode::Train), ShapeError);
  CHECK_THROWS_AS(b.forward(x, random_input(rng, 1, 8, 7), Mode::Train), ShapeError);
  CHECK_THROWS_AS(b.infer(x, x), Error);
}

TEST_CASE("duplicate branches collapse to twice the main branch") {
  std::mt19937_64 rng(4);
  ModelConfig cfg = toy(Variant::Bdrrn);
  cfg.extra_iters = cfg.main_iters;
  Model m(cfg, 7);
  set_stats(m, 0.45, 0.06);
  auto x = random_input(rng, 1, 10, 12);
  ForwardTaps taps;
  auto out = m.forward(x, x, Mode::Eval, &taps);
  CHECK(to_vec(taps.main.data()) == to_vec(taps.extra.data()));

  // Hand-wired evaluation of one branch, then f = u + u and the merge.
  const auto& P = m.parameters();
  auto conv = [&](const std::string& l, const Tensor& t) { return conv3x3(t, P.tensor(l + ".w"), P.tensor(l + ".b")); };
  auto bn = batchnorm_input(x, P.tensor("bn.gamma"), P.tensor("bn.beta"),
                            static_cast<const BatchNormStats&>(m.input_stats()));
  const Tensor x0 = conv("conv_in", bn);
  Tensor u = x0;
  for (int i = 0; i < cfg.main_iters; ++i) u = add(x0, conv("rru.c2", relu(conv("rru.c1", relu(u)))));
  const Tensor f = add(u, u);
  Tensor w = f;
  for (int i = 0; i < cfg.merge_iters; ++i) w = add(f, conv("rru.c2", relu(conv("rru.c1", relu(w)))));
  const auto expected = add(x, conv("recon", relu(w)));
  CHECK(to_vec(taps.fused.data()) == to_vec(f.data()));
  CHECK(to_vec(out.data()) == to_vec(expected.data()));
  for (size_t i = 0; i < u.data().size(); ++i) CHECK(taps.fused.data()[i] == 2 * u.data()[i]);
}

TEST_CASE("perturbing the shared recursion weights moves every branch") {
  std::mt19937_64 rng(5);
  Model m(toy(Variant::Bdrrn), 8);
  set_stats(m, 0.5, 0.07);
  auto x = random_input(rng, 1, 8, 8);
  auto mask = random_input(rng, 1, 8, 8);
  ForwardTaps before, after;
  m.forward(x, mask, Mode::Eval, &before);
  m.parameters().at("rru.c1.w").value.mutable_data()[0] += 1e-3;
  m.forward(x, mask, Mode::Eval, &after);
  CHECK(to_vec(before.main.data()) != to_vec(after.main.data()));
  CHECK(to_vec(before.extra.data()) != to_vec(after.extra.data()));
  CHECK(to_vec(before.merged.data()) != to_vec(after.merged.data()));
}

TEST_CASE("eval forward is pure") {
  std::mt19937_64 rng(6);
  Model m(toy(Variant::Bdrrn, Fusion::Concat), 9);
  set_stats(m, 0.4, 0.05);
  auto x = random_input(rng, 1, 11, 7);
  auto mask = random_input(rng, 1, 11, 7);
  const auto ckpt = serialize_checkpoint(m);
  const auto a = to_vec(m.infer(x, mask).data());
  const auto b = to_vec(m.infer(x, mask).data());
  CHECK(a == b);
  CHECK(to_vec(m.forward(x, mask, Mode::Eval).data()) == a);
  CHECK(serialize_checkpoint(m) == ckpt);
}

TEST_CASE("train-mode forward updates running statistics") {
  std::mt19937_64 rng(7);
  Model m(toy(Variant::Bdrrn), 0);
  CHECK_FALSE(m.input_stats().available);
  auto x = random_input(rng, 2, 8, 8);
  m.forward(x, Tensor::filled({2, 1, 8, 8}, 0.3), Mode::Train);
  CHECK(m.input_stats().available);
  CHECK(m.mask_stats().running_mean == doctest::Approx(0.03));
  CHECK(m.input_stats().running_mean != m.mask_stats().running_mean);
}

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(8);
  for (auto cfg : {toy(Variant::Drrn), toy(Variant::Bdrrn), toy(Variant::Bdrrn, Fusion::Concat, 3)}) {
    Model m(cfg, 11);
    auto x = random_input(rng, 1, 9, 9);
    std::optional<Tensor> mask;
    if (cfg.uses_mask()) mask = random_input(rng, 1, 9, 9);
    m.forward(x, mask, Mode::Train);
    const auto path = temp_file("rt.ckpt");
    save_checkpoint(m, path);
    Model back = load_checkpoint(path);
    fs::remove(path);
    CHECK(back.config() == cfg);
    CHECK(to_vec(back.infer(x, mask).data()) == to_vec(m.infer(x, mask).data()));
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(m));
  }
}

TEST_CASE("checkpoint layout") {
  Model m(toy(Variant::Drrn, Fusion::Add, 2), 0);
  const auto bytes = serialize_checkpoint(m);
  CHECK(bytes.substr(0, 4) == "BDRN");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 0);
  CHECK(bytes[10] == 2);
  // 10 parameters plus the two input running statistics.
  CHECK(static_cast<unsigned char>(bytes[26]) == 12);
  // First tensor by bytewise name order.
  CHECK(bytes[30] == 7);
  CHECK(bytes.substr(32, 7) == "bn.beta");
}

TEST_CASE("checkpoint errors are distinct") {
  Model m(toy(Variant::Bdrrn), 0);
  const auto bytes = serialize_checkpoint(m);
  auto kind_of = [](const std::string& b) {
    try {
      deserialize_checkpoint(b);
    } catch (const CheckpointError& e) {
      return e.kind();
    }
    FAIL("no error");
    return CheckpointError::Kind::Io;
  };
  for (size_t cut : {size_t{2}, size_t{6}, size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK(kind_of(bytes.substr(0, cut)) == CheckpointError::Kind::Truncated);
  }
  CHECK(kind_of("XDRN" + bytes.substr(4)) == CheckpointError::Kind::BadMagic);
  auto v2 = bytes;
  v2[4] = 2;
  CHECK(kind_of(v2) == CheckpointError::Kind::UnsupportedVersion);
  CHECK(kind_of(bytes + "x") == CheckpointError::Kind::TrailingData);
  auto bad_channels = bytes;
  bad_channels[10] = 5;
  CHECK(kind_of(bad_channels) == CheckpointError::Kind::ShapeMismatch);
  CHECK_THROWS_AS(load_checkpoint(temp_file("missing.ckpt")), CheckpointError);
}

TEST_CASE("drrn checkpoint loads as bdrrn add") {
  Model d(toy(Variant::Drrn), 4);
  const auto path = temp_file("drrn.ckpt");
  save_checkpoint(d, path);
  Model b = load_checkpoint_as(path, toy(Variant::Bdrrn));
  CHECK(b.config().variant == Variant::Bdrrn);
  for (const auto& name : d.parameters().names()) {
    CHECK(to_vec(b.parameters().tensor(name).data()) == to_vec(d.parameters().tensor(name).data()));
  }
  CHECK_FALSE(b.mask_stats().available);
  try {
    load_checkpoint_as(path, toy(Variant::Bdrrn, Fusion::Concat));
    FAIL("expected an error");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::MissingTensor);
  }
  fs::remove(path);
}

TEST_CASE("gradient check passes on the toy configuration for several seeds") {
  for (auto fusion : {Fusion::Add, Fusion::Concat})
    for (uint64_t seed : {1, 2, 3}) {
      GradCheckOptions opts;
      opts.config.fusion = fusion;
      opts.seed = seed;
      const auto r = gradient_check(opts);
      CHECK(r.max_relative_error < 1e-4);
      CHECK(r.elements_checked + r.elements_skipped == param_count(opts.config));
    }
}
