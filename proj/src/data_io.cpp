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

#include "bdrrn/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace bdrrn {

namespace fs = std::filesystem;

size_t yuv420_frame_bytes(int width, int height) {
  return static_cast<size_t>(width) * height * 3 / 2;
}

namespace {

void check_yuv_dims(int width, int height) {
  if (width <= 0 || height <= 0) throw InputError("YUV dimensions must be positive");
  if (width % 2 != 0 || height % 2 != 0) {
    throw InputError("YUV 4:2:0 needs even dimensions, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

}  // namespace

std::vector<Yuv420Frame> read_yuv420(const std::string& path, int width, int height, int max_frames) {
  check_yuv_dims(width, height);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const size_t frame_bytes = yuv420_frame_bytes(width, height);
  const auto file_bytes = static_cast<size_t>(fs::file_size(path));
  const size_t available = file_bytes / frame_bytes;
  if (available == 0) {
    throw IoError("'" + path + "' is too short: " + std::to_string(file_bytes) + " bytes, one " +
                  std::to_string(width) + "x" + std::to_string(height) + " frame needs " +
                  std::to_string(frame_bytes));
  }
  const size_t count =
      max_frames < 0 ? available : std::min(available, static_cast<size_t>(max_frames));
  const size_t luma_bytes = static_cast<size_t>(width) * height;

  std::vector<Yuv420Frame> frames(count);
  for (auto& f : frames) {
    f.luma = Plane8(width, height);
    f.chroma.resize(frame_bytes - luma_bytes);
    in.read(reinterpret_cast<char*>(f.luma.pixels.data()), static_cast<std::streamsize>(luma_bytes));
    in.read(reinterpret_cast<char*>(f.chroma.data()), static_cast<std::streamsize>(f.chroma.size()));
    if (!in) throw IoError("short read from '" + path + "'");
  }
  return frames;
}

std::vector<Plane8> read_yuv420_y(const std::string& path, int width, int height, int max_frames) {
  auto frames = read_yuv420(path, width, height, max_frames);
  std::vector<Plane8> planes;
  planes.reserve(frames.size());
  for (auto& f : frames) planes.push_back(std::move(f.luma));
  return planes;
}

void write_yuv420(const std::string& path, const std::vector<Yuv420Frame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& f : frames) {
    if (f.chroma.size() != f.luma.size() / 2) throw InputError("chroma size does not match luma plane");
    out.write(reinterpret_cast<const char*>(f.luma.pixels.data()),
              static_cast<std::streamsize>(f.luma.size()));
    out.write(reinterpret_cast<const char*>(f.chroma.data()), static_cast<std::streamsize>(f.chroma.size()));
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

int pgm_int(std::istream& in, const char* field) {
  const std::string t = pgm_token(in);
  try {
    size_t used = 0;
    const int v = std::stoi(t, &used);
    if (used != t.size() || v < 0) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string("PGM: bad ") + field + " '" + t + "'");
  }
}

}  // namespace

Plane8 read_pgm(std::istream& in) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P') throw InputError("not a PGM file");
  if (magic[1] != '5') {
    throw InputError(std::string("unsupported PGM format P") + magic[1] + " (only binary P5 is supported)");
  }
  const int width = pgm_int(in, "width");
  const int height = pgm_int(in, "height");
  const int maxval = pgm_int(in, "maxval");
  if (maxval != 255) throw InputError("unsupported PGM maxval " + std::to_string(maxval) + " (need 255)");
  Plane8 plane(width, height);
  in.read(reinterpret_cast<char*>(plane.pixels.data()), static_cast<std::streamsize>(plane.size()));
  if (static_cast<size_t>(in.gcount()) != plane.size()) throw IoError("PGM: truncated pixel data");
  return plane;
}

Plane8 read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_pgm(in);
}

void write_pgm(const Plane8& plane, std::ostream& out) {
  out << "P5\n" << plane.width << ' ' << plane.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(plane.pixels.data()), static_cast<std::streamsize>(plane.size()));
}

void write_pgm(const Plane8& plane, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_pgm(plane, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::string& base_dir) {
  std::vector<ManifestEntry> entries;
  int line_no = 0;
  std::string line;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path.string() : (fs::path(base_dir) / path).string();
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line.substr(0, line.find('#')));
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 7) {
      throw ParseError("manifest entry needs 7 fields (original decoded partition qp width height frames)",
                       line_no);
    }
    ManifestEntry e;
    e.original_path = resolve(tok[0]);
    e.decoded_path = resolve(tok[1]);
    e.partition_path = resolve(tok[2]);
    try {
      e.qp = std::stoi(tok[3]);
      e.width = std::stoi(tok[4]);
      e.height = std::stoi(tok[5]);
      e.frames = std::stoi(tok[6]);
    } catch (const std::exception&) {
      throw ParseError("non-integer qp/width/height/frames", line_no);
    }
    if (std::find(std::begin(kTrainingQps), std::end(kTrainingQps), e.qp) == std::end(kTrainingQps)) {
      throw ParseError("qp must be one of 22, 27, 32, 37, got " + std::to_string(e.qp), line_no);
    }
    if (e.width <= 0 || e.height <= 0 || e.frames <= 0) {
      throw ParseError("width, height and frames must be positive", line_no);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  const auto base = fs::path(path).parent_path().string();
  return parse_manifest(in, base.empty() ? "." : base);
}

void check_manifest_entry(const ManifestEntry& e) {
  const size_t need = yuv420_frame_bytes(e.width, e.height) * static_cast<size_t>(e.frames);
  for (const auto* p : {&e.original_path, &e.decoded_path}) {
    if (!fs::exists(*p)) throw IoError("manifest references missing file '" + *p + "'");
    if (fs::file_size(*p) < need) {
      throw IoError("'" + *p + "' holds fewer than " + std::to_string(e.frames) + " frames of " +
                    std::to_string(e.width) + "x" + std::to_string(e.height));
    }
  }
  if (!fs::exists(e.partition_path)) {
    throw IoError("manifest references missing file '" + e.partition_path + "'");
  }
}

std::vector<PatchPair> extract_patches(const Plane8& decoded, const Plane8& original,
                                       const MeanMask& mask, int size, int stride, int frame_id) {
  if (decoded.width != original.width || decoded.height != original.height ||
      mask.width != decoded.width || mask.height != decoded.height) {
    throw InputError("extract_patches: decoded, original and mask dimensions differ");
  }
  if (size <= 0 || stride <= 0) throw InputError("extract_patches: size and stride must be positive");
  std::vector<PatchPair> patches;
  for (int y = 0; y + size <= decoded.height; y += stride) {
    for (int x = 0; x + size <= decoded.width; x += stride) {
      PatchPair p;
      p.decoded = Plane8(size, size);
      p.original = Plane8(size, size);
      p.mask.resize(static_cast<size_t>(size) * size);
      for (int r = 0; r < size; ++r) {
        const size_t src = static_cast<size_t>(y + r) * decoded.width + x;
        std::copy_n(decoded.pixels.begin() + src, size, p.decoded.pixels.begin() + r * size);
        std::copy_n(original.pixels.begin() + src, size, p.original.pixels.begin() + r * size);
        std::copy_n(mask.values.begin() + src, size, p.mask.begin() + r * size);
      }
      p.frame_id = frame_id;
      p.x = x;
      p.y = y;
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

std::vector<int> select_frames(uint64_t seed, int frame_count, int k) {
  if (k < 0 || k > frame_count) {
    throw InputError("cannot select " + std::to_string(k) + " frames from " + std::to_string(frame_count));
  }
  std::vector<int> pool(static_cast<size_t>(frame_count));
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, frame_count - 1);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(pick(rng))]);
  }
  pool.resize(static_cast<size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

uint64_t clip_seed(uint64_t base_seed, size_t clip_index, int qp) {
  // splitmix64 over the three inputs.
  auto mix = [](uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base_seed) ^ static_cast<uint64_t>(clip_index)) ^ static_cast<uint64_t>(qp));
}

std::vector<PatchPair> build_patch_dataset(const std::vector<ManifestEntry>& manifest,
                                           const DatasetOptions& options) {
  std::vector<PatchPair> patches;
  int frame_id = 0;
  for (size_t clip = 0; clip < manifest.size(); ++clip) {
    const auto& e = manifest[clip];
    if (e.qp != options.qp) continue;
    check_manifest_entry(e);
    const auto originals = read_yuv420_y(e.original_path, e.width, e.height, e.frames);
    const auto decodeds = read_yuv420_y(e.decoded_path, e.width, e.height, e.frames);
    const auto partitions = read_partition_file(e.partition_path);
    if (partitions.width != e.width || partitions.height != e.height) {
      throw InputError("'" + e.partition_path + "' is " + std::to_string(partitions.width) + "x" +
                       std::to_string(partitions.height) + " but the manifest says " +
                       std::to_string(e.width) + "x" + std::to_string(e.height));
    }
    if (static_cast<int>(partitions.frames.size()) < e.frames) {
      throw InputError("'" + e.partition_path + "' declares fewer frames than the manifest");
    }
    const auto chosen = select_frames(clip_seed(options.seed, clip, e.qp), e.frames,
                                      std::min(options.frames_per_clip, e.frames));
    for (int f : chosen) {
      const auto& decoded = decodeds[static_cast<size_t>(f)];
      const auto mask = mean_mask(decoded, partitions.frames[static_cast<size_t>(f)]);
      auto cut = extract_patches(decoded, originals[static_cast<size_t>(f)], mask, options.patch_size,
                                 options.stride, frame_id++);
      std::move(cut.begin(), cut.end(), std::back_inserter(patches));
    }
  }
  return patches;
}

}  // namespace bdrrn
