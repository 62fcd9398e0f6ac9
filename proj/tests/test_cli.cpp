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

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "bdrrn/data_io.hpp"
#include "bdrrn/metrics.hpp"
#include "bdrrn/model.hpp"
#include "oracles.hpp"

using namespace bdrrn;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Result run(const std::string& args) {
  const std::string cmd = std::string(BDRRN_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf{};
  while (size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("bdrrn_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

// Smooth frames, so degradation is learnable and PSNR is finite.
std::vector<Yuv420Frame> smooth_clip(int w, int h, int frames, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Yuv420Frame> out;
  for (int f = 0; f < frames; ++f) {
    Yuv420Frame fr{Plane8(w, h), std::vector<uint8_t>(static_cast<size_t>(w) * h / 2, 100)};
    const double a = u(rng), b = u(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        fr.luma.at(x, y) = static_cast<uint8_t>(128 + 70 * std::sin(a * 5 + x * 0.09) * std::cos(b * 3 + y * 0.07));
    out.push_back(std::move(fr));
  }
  return out;
}

void write_rd(const std::string& path, const std::vector<std::tuple<std::string, double, double>>& rows) {
  std::ofstream out(path);
  const int qps[4] = {37, 32, 27, 22};
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& [name, rate, db] = rows[i];
    out << name << ' ' << qps[i % 4] << ' ' << rate << ' ' << db << '\n';
  }
}

}  // namespace

TEST_CASE("params") {
  auto r = run("params --variant drrn");
  CHECK(r.code == 0);
  CHECK(r.out.find("total: 75075") != std::string::npos);

  r = run("params --variant bdrrn --fusion add");
  CHECK(r.code == 0);
  CHECK(r.out.find("total: 75075") != std::string::npos);
  CHECK(r.out.find("Δ vs drrn: 0") != std::string::npos);

  r = run("params --variant bdrrn --fusion concat");
  CHECK(r.out.find("total: 148867") != std::string::npos);

  r = run("params --variant bdrrn --channels 8 --iters 6,2,1");
  CHECK(r.code == 0);
  CHECK(r.out.find("Δ vs drrn: 0") != std::string::npos);
  CHECK(r.out.find("warning") == std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run("params --variant drrn --fusion add").code == 1);
  CHECK(run("params --bogus").code == 1);
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("params --iters 9,3").code == 1);
  CHECK(run("params --help").code == 0);
  CHECK(run("train --help").code == 0);
}

TEST_CASE("gradcheck on the toy config") {
  auto r = run("gradcheck --channels 4 --size 12x12");
  CHECK(r.code == 0);
  CHECK(r.out.find("max relative error") != std::string::npos);
}

TEST_CASE("bdrate") {
  Workspace ws;
  write_rd(ws / "hm.txt", {{"Seq", 100, 30}, {"Seq", 200, 33}, {"Seq", 400, 36}, {"Seq", 800, 39}});
  write_rd(ws / "ours.txt", {{"Seq", 90, 30.5}, {"Seq", 185, 33.4}, {"Seq", 370, 36.3}, {"Seq", 760, 39.2}});
  auto r = run("bdrate --anchor " + (ws / "hm.txt") + " --test " + (ws / "hm.txt"));
  CHECK(r.code == 0);
  CHECK(r.out.find("0.00") != std::string::npos);
  CHECK(r.out.find("-0.00") == std::string::npos);

  r = run("bdrate --csv --anchor " + (ws / "hm.txt") + " --test " + (ws / "ours.txt"));
  CHECK(r.code == 0);
  CHECK(r.out.find("sequence,method,bd_rate_percent") != std::string::npos);
  CHECK(r.out.find("Seq,ours,-14.81") != std::string::npos);

  write_rd(ws / "far.txt", {{"Seq", 100, 50}, {"Seq", 200, 53}, {"Seq", 400, 56}, {"Seq", 800, 59}});
  CHECK(run("bdrate --anchor " + (ws / "hm.txt") + " --test " + (ws / "far.txt")).code == 2);
  CHECK(run("bdrate --anchor " + (ws / "missing.txt") + " --test " + (ws / "hm.txt")).code == 2);
}

TEST_CASE("synth is deterministic and lossless at qstep 1") {
  Workspace ws;
  write_yuv420(ws / "orig.yuv", smooth_clip(64, 48, 3, 1));
  const std::string base = "synth --original " + (ws / "orig.yuv") + " --dims 64x48 --frames 3 --seed 5 ";
  CHECK(run(base + "--qstep 1 --out-decoded " + (ws / "q1.yuv") + " --out-partition " + (ws / "q1.bpart")).code == 0);
  CHECK(slurp(ws / "q1.yuv") == slurp(ws / "orig.yuv"));

  CHECK(run(base + "--qstep 24 --out-decoded " + (ws / "a.yuv") + " --out-partition " + (ws / "a.bpart")).code == 0);
  CHECK(run(base + "--qstep 24 --out-decoded " + (ws / "b.yuv") + " --out-partition " + (ws / "b.bpart")).code == 0);
  CHECK(slurp(ws / "a.yuv") == slurp(ws / "b.yuv"));
  CHECK(slurp(ws / "a.bpart") == slurp(ws / "b.bpart"));

  CHECK(run(base + "--qstep 8 --out-decoded " + (ws / "q8.yuv") + " --out-partition " + (ws / "q8.bpart")).code == 0);
  CHECK(run(base + "--qstep 32 --out-decoded " + (ws / "q32.yuv") + " --out-partition " + (ws / "q32.bpart")).code ==
        0);
  const auto orig = read_yuv420(ws / "orig.yuv", 64, 48);
  const auto q8 = read_yuv420(ws / "q8.yuv", 64, 48);
  const auto q32 = read_yuv420(ws / "q32.yuv", 64, 48);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(std::isfinite(psnr(orig[i].luma, q32[i].luma)));
    CHECK(psnr(orig[i].luma, q32[i].luma) < psnr(orig[i].luma, q8[i].luma));
    CHECK(q32[i].chroma == orig[i].chroma);
  }

  CHECK(run(base + "--qstep 0 --out-decoded " + (ws / "x.yuv") + " --out-partition " + (ws / "x.bpart")).code == 2);
  CHECK(run("synth --original " + (ws / "orig.yuv") + " --dims 64x48 --frames 9 --out-decoded " + (ws / "x.yuv") +
            " --out-partition " + (ws / "x.bpart"))
            .code == 2);
}

TEST_CASE("mask rendering") {
  Workspace ws;
  write_pgm(Plane8(40, 24, 90), ws / "flat.pgm");
  write_partition_file(ws / "p.bpart", BpartFile{1, 40, 24, {random_quadtree(3, 40, 24, 0.5)}});
  CHECK(run("mask --decoded " + (ws / "flat.pgm") + " --partition " + (ws / "p.bpart") + " --out " + (ws / "m.pgm"))
            .code == 0);
  CHECK(read_pgm(ws / "m.pgm") == Plane8(40, 24, 90));

  std::mt19937_64 rng(4);
  const auto frame = oracle::random_plane(rng, 40, 24);
  write_pgm(frame, ws / "rand.pgm");
  CHECK(run("mask --decoded " + (ws / "rand.pgm") + " --partition " + (ws / "p.bpart") + " --out " + (ws / "r.pgm"))
            .code == 0);
  const auto ref = oracle::mean_mask(frame, random_quadtree(3, 40, 24, 0.5));
  const auto got = read_pgm(ws / "r.pgm");
  for (size_t i = 0; i < ref.size(); ++i) CHECK(got.pixels[i] == static_cast<uint8_t>(std::lround(ref[i] * 255)));

  write_pgm(Plane8(48, 24, 90), ws / "wide.pgm");
  auto r = run("mask --decoded " + (ws / "wide.pgm") + " --partition " + (ws / "p.bpart") + " --out " + (ws / "w.pgm"));
  CHECK(r.code == 2);
  CHECK(r.out.find("48x24") != std::string::npos);
  CHECK(r.out.find("40x24") != std::string::npos);
}

TEST_CASE("enhance") {
  Workspace ws;
  ModelConfig drrn{Variant::Drrn, Fusion::Add, 2, 9, 3, 2};
  ModelConfig bdrrn{Variant::Bdrrn, Fusion::Add, 2, 9, 3, 2};
  for (auto [cfg, name] : {std::pair{drrn, "d.ckpt"}, std::pair{bdrrn, "b.ckpt"}}) {
    Model m(cfg, 1);
    m.zero_reconstruction();
    save_checkpoint(m, ws / name);
  }
  std::mt19937_64 rng(5);
  const auto frame = oracle::random_plane(rng, 91, 37);
  write_pgm(frame, ws / "odd.pgm");
  write_partition_file(ws / "odd.bpart", BpartFile{1, 91, 37, {random_quadtree(1, 91, 37, 0.5)}});

  auto r = run("enhance --ckpt " + (ws / "b.ckpt") + " --decoded " + (ws / "odd.pgm") + " --partition " +
               (ws / "odd.bpart") + " --out " + (ws / "out.pgm"));
  CHECK(r.code == 0);
  CHECK(read_pgm(ws / "out.pgm") == frame);

  r = run("enhance --ckpt " + (ws / "b.ckpt") + " --decoded " + (ws / "odd.pgm") + " --out " + (ws / "x.pgm"));
  CHECK(r.code == 2);

  r = run("enhance --ckpt " + (ws / "d.ckpt") + " --decoded " + (ws / "odd.pgm") + " --partition " +
          (ws / "odd.bpart") + " --out " + (ws / "d.pgm"));
  CHECK(r.code == 0);
  CHECK(r.out.find("warning") != std::string::npos);
  CHECK(read_pgm(ws / "d.pgm") == frame);

  write_yuv420(ws / "clip.yuv", smooth_clip(64, 32, 2, 3));
  write_partition_file(ws / "clip.bpart",
                       BpartFile{1, 64, 32, {random_quadtree(1, 64, 32, 0.5), random_quadtree(2, 64, 32, 0.5)}});
  r = run("enhance --ckpt " + (ws / "b.ckpt") + " --decoded " + (ws / "clip.yuv") + " --dims 64x32 --partition " +
          (ws / "clip.bpart") + " --out " + (ws / "clip_out.yuv"));
  CHECK(r.code == 0);
  CHECK(slurp(ws / "clip_out.yuv") == slurp(ws / "clip.yuv"));

  std::ofstream(ws / "junk.ckpt") << "not a checkpoint";
  CHECK(run("enhance --ckpt " + (ws / "junk.ckpt") + " --decoded " + (ws / "odd.pgm") + " --out " + (ws / "j.pgm"))
            .code == 2);
}

TEST_CASE("train, dataset and eval on a toy manifest") {
  Workspace ws;
  const auto orig = smooth_clip(64, 64, 3, 9);
  write_yuv420(ws / "orig.yuv", orig);
  REQUIRE(run("synth --original " + (ws / "orig.yuv") + " --dims 64x64 --frames 3 --qstep 16 --seed 2 --out-decoded " +
              (ws / "dec.yuv") + " --out-partition " + (ws / "dec.bpart"))
              .code == 0);
  std::ofstream(ws / "manifest.txt") << "orig.yuv dec.yuv dec.bpart 32 64 64 3\n";

  auto r = run("dataset --manifest " + (ws / "manifest.txt") + " --qp 32 --frames-per-clip 2");
  CHECK(r.code == 0);
  CHECK(r.out.find("2 patches") != std::string::npos);

  const std::string train = "train --manifest " + (ws / "manifest.txt") +
                            " --variant bdrrn --fusion add --channels 2 --qp 32 --epochs 2 --batch 1 --seed 3 ";
  r = run(train + "--out " + (ws / "a.ckpt"));
  CHECK(r.code == 0);
  CHECK(slurp(ws / "a.ckpt").substr(0, 4) == "BDRN");
  CHECK(fs::exists(ws / "a.ckpt.steps.csv"));
  CHECK(slurp(ws / "a.ckpt.steps.csv").rfind("step,epoch,loss\n", 0) == 0);
  CHECK(run(train + "--out " + (ws / "b.ckpt")).code == 0);
  CHECK(slurp(ws / "a.ckpt") == slurp(ws / "b.ckpt"));

  CHECK(run("train --manifest " + (ws / "manifest.txt") + " --qp 22 --channels 2 --epochs 1 --batch 1 --out " +
            (ws / "c.ckpt"))
            .code == 2);

  Model zero(ModelConfig{Variant::Bdrrn, Fusion::Add, 2, 9, 3, 2}, 0);
  zero.zero_reconstruction();
  save_checkpoint(zero, ws / "zero.ckpt");
  r = run("eval --ckpt " + (ws / "zero.ckpt") + " --manifest " + (ws / "manifest.txt") + " --qp 32");
  CHECK(r.code == 0);
  CHECK(r.out.find("0.0000\n") != std::string::npos);
  CHECK(r.out.find("-0.0000") == std::string::npos);

  CHECK(run("eval --ckpt " + (ws / "a.ckpt") + " --manifest " + (ws / "manifest.txt") + " --qp 32").code == 0);
}
