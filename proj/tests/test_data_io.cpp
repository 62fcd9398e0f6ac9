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
#include <sstream>

#include "bdrrn/data_io.hpp"
#include "oracles.hpp"

using namespace bdrrn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("bdrrn_data_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<uint8_t> counting_bytes(size_t n) {
  std::vector<uint8_t> b(n);
  for (size_t i = 0; i < n; ++i) b[i] = static_cast<uint8_t>(i * 7 + 3);
  return b;
}

}  // namespace

TEST_CASE("yuv420 luma reading") {
  TempDir dir;
  const auto bytes = counting_bytes(768);
  write_bytes(dir.file("a.yuv"), bytes);
  auto planes = read_yuv420_y(dir.file("a.yuv"), 16, 16);
  REQUIRE(planes.size() == 2);
  CHECK(planes[0].width == 16);
  CHECK(planes[0].pixels == std::vector<uint8_t>(bytes.begin(), bytes.begin() + 256));
  CHECK(planes[1].pixels == std::vector<uint8_t>(bytes.begin() + 384, bytes.begin() + 640));
  CHECK(read_yuv420_y(dir.file("a.yuv"), 16, 16, 1).size() == 1);

  write_bytes(dir.file("short.yuv"), counting_bytes(300));
  CHECK_THROWS_AS(read_yuv420_y(dir.file("short.yuv"), 16, 16), InputError);
  CHECK_THROWS_AS(read_yuv420_y(dir.file("a.yuv"), 15, 16), InputError);
  CHECK_THROWS_AS(read_yuv420_y(dir.file("missing.yuv"), 16, 16), InputError);
}

TEST_CASE("yuv420 write keeps chroma bytes") {
  TempDir dir;
  write_bytes(dir.file("in.yuv"), counting_bytes(3 * 24 * 8 * 3 / 2));
  auto frames = read_yuv420(dir.file("in.yuv"), 24, 8);
  REQUIRE(frames.size() == 3);
  CHECK(frames[0].chroma.size() == 96);
  write_yuv420(dir.file("out.yuv"), frames);
  std::ifstream a(dir.file("in.yuv"), std::ios::binary), b(dir.file("out.yuv"), std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST_CASE("pgm round trip") {
  TempDir dir;
  std::mt19937_64 rng(1);
  auto p = oracle::random_plane(rng, 37, 91);
  write_pgm(p, dir.file("p.pgm"));
  CHECK(read_pgm(dir.file("p.pgm")) == p);

  Plane8 one(1, 1, 200);
  write_pgm(one, dir.file("one.pgm"));
  CHECK(fs::file_size(dir.file("one.pgm")) < 16);
  CHECK(read_pgm(dir.file("one.pgm")) == one);
}

TEST_CASE("pgm header with comments") {
  std::istringstream in(std::string("P5\n# made by hand\n2 1\n255\n") + "\x01\x02");
  auto p = read_pgm(in);
  CHECK(p.width == 2);
  CHECK(p.pixels == std::vector<uint8_t>{1, 2});
}

TEST_CASE("pgm rejects other formats") {
  std::istringstream ascii("P2\n2 1\n255\n1 2\n");
  CHECK_THROWS_AS(read_pgm(ascii), InputError);
  std::istringstream deep(std::string("P5\n1 1\n65535\n") + "\x00\x01");
  CHECK_THROWS_AS(read_pgm(deep), InputError);
  std::istringstream truncated(std::string("P5\n4 4\n255\n") + "abc");
  CHECK_THROWS_AS(read_pgm(truncated), InputError);
}

TEST_CASE("patch counts") {
  auto count = [](int w, int h) {
    Plane8 p(w, h);
    MeanMask m{w, h, std::vector<double>(static_cast<size_t>(w) * h, 0.0)};
    return extract_patches(p, p, m).size();
  };
  CHECK(count(128, 128) == 4);
  CHECK(count(100, 100) == 1);
  CHECK(count(1920, 1080) == 480);
  CHECK(count(63, 200) == 0);
  for (int w : {64, 65, 130, 191, 192})
    for (int h : {64, 127, 128, 200}) CHECK(count(w, h) == static_cast<size_t>(((w - 64) / 64 + 1) * ((h - 64) / 64 + 1)));
}

TEST_CASE("patches are cut from identical coordinates in row-major order") {
  std::mt19937_64 rng(2);
  auto dec = oracle::random_plane(rng, 200, 140);
  auto orig = oracle::random_plane(rng, 200, 140);
  auto mask = mean_mask(dec, random_quadtree(3, 200, 140, 0.5));
  auto patches = extract_patches(dec, orig, mask, 64, 64, 7);
  REQUIRE(patches.size() == 6);
  CHECK(patches[1].x == 64);
  CHECK(patches[1].y == 0);
  CHECK(patches[3].x == 0);
  CHECK(patches[3].y == 64);
  Plane8 pasted(200, 140);
  for (const auto& pp : patches) {
    CHECK(pp.frame_id == 7);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        pasted.at(pp.x + x, pp.y + y) = pp.decoded.at(x, y);
        CHECK(pp.original.at(x, y) == orig.at(pp.x + x, pp.y + y));
        CHECK(pp.mask[static_cast<size_t>(y) * 64 + x] == mask.at(pp.x + x, pp.y + y));
      }
  }
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 192; ++x) CHECK(pasted.at(x, y) == dec.at(x, y));
  CHECK_THROWS_AS(extract_patches(dec, oracle::random_plane(rng, 10, 10), mask), InputError);
}

TEST_CASE("select_frames") {
  CHECK(select_frames(5, 4, 4) == std::vector<int>{0, 1, 2, 3});
  CHECK(select_frames(11, 60) == select_frames(11, 60));
  auto s = select_frames(12, 60);
  CHECK(s.size() == 4);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  CHECK_THROWS_AS(select_frames(1, 3, 4), InputError);
}

TEST_CASE("select_frames is uniform over many seeds") {
  const int n = 10, k = 4, trials = 20000;
  std::vector<int> hits(n, 0);
  for (int s = 0; s < trials; ++s)
    for (int i : select_frames(static_cast<uint64_t>(s), n, k)) ++hits[i];
  const double expected = static_cast<double>(trials) * k / n;
  double chi2 = 0.0;
  for (int h : hits) chi2 += (h - expected) * (h - expected) / expected;
  // 9 degrees of freedom; 27.88 is the 0.999 quantile.
  CHECK(chi2 < 27.88);
}

TEST_CASE("manifest parsing") {
  std::istringstream in(
      "# clip list\n"
      "a.yuv a_dec.yuv a.bpart 22 64 64 3\n"
      "\n"
      "/abs/b.yuv b_dec.yuv b.bpart 37 128 64 10  # trailing\n");
  auto m = parse_manifest(in, "/data");
  REQUIRE(m.size() == 2);
  CHECK(m[0].original_path == "/data/a.yuv");
  CHECK(m[1].original_path == "/abs/b.yuv");
  CHECK(m[1].qp == 37);
  CHECK(m[1].frames == 10);

  std::istringstream bad_qp("a b c 23 64 64 1\n");
  CHECK_THROWS_AS(parse_manifest(bad_qp, "."), ParseError);
  std::istringstream short_line("a b c 22 64 64\n");
  CHECK_THROWS_AS(parse_manifest(short_line, "."), ParseError);
}

TEST_CASE("dataset building is a pure function of manifest and seed") {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::vector<Yuv420Frame> orig, dec;
  BpartFile parts{1, 128, 64, {}};
  for (int f = 0; f < 5; ++f) {
    auto p = oracle::random_plane(rng, 128, 64);
    auto part = random_quadtree(static_cast<uint64_t>(f), 128, 64, 0.5);
    orig.push_back({p, std::vector<uint8_t>(4096, 128)});
    dec.push_back({synth_degrade(p, part, 16), std::vector<uint8_t>(4096, 128)});
    parts.frames.push_back(part);
  }
  write_yuv420(dir.file("o.yuv"), orig);
  write_yuv420(dir.file("d.yuv"), dec);
  write_partition_file(dir.file("p.bpart"), parts);
  std::ofstream(dir.file("m.txt")) << "o.yuv d.yuv p.bpart 32 128 64 5\n";
  auto manifest = read_manifest(dir.file("m.txt"));
  CHECK_NOTHROW(check_manifest_entry(manifest[0]));

  DatasetOptions opts;
  opts.qp = 32;
  opts.seed = 9;
  auto a = build_patch_dataset(manifest, opts);
  auto b = build_patch_dataset(manifest, opts);
  REQUIRE(a.size() == 8);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].decoded == b[i].decoded);
    CHECK(a[i].frame_id == b[i].frame_id);
  }
  const auto frames = select_frames(clip_seed(9, 0, 32), 5, 4);
  CHECK(a[0].frame_id == 0);
  CHECK(a[7].frame_id == 3);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      CHECK(a[1].decoded.at(x, y) == dec[static_cast<size_t>(frames[0])].luma.at(64 + x, y));
      CHECK(a[6].original.at(x, y) == orig[static_cast<size_t>(frames[3])].luma.at(x, y));
    }

  opts.qp = 22;
  CHECK(build_patch_dataset(manifest, opts).empty());
}
