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
#include <iosfwd>
#include <string>
#include <vector>

#include "bdrrn/partition.hpp"
#include "bdrrn/plane.hpp"

namespace bdrrn {

// One 8-bit 4:2:0 frame. Chroma bytes (U then V) are carried opaquely so
// tools can copy them through untouched.
struct Yuv420Frame {
  Plane8 luma;
  std::vector<uint8_t> chroma;
};

size_t yuv420_frame_bytes(int width, int height);

// Y planes of the first min(max_frames, available) frames; max_frames < 0
// reads every complete frame. Throws on odd dimensions or when the file
// holds less than one frame.
std::vector<Plane8> read_yuv420_y(const std::string& path, int width, int height, int max_frames = -1);
std::vector<Yuv420Frame> read_yuv420(const std::string& path, int width, int height, int max_frames = -1);
void write_yuv420(const std::string& path, const std::vector<Yuv420Frame>& frames);

// Binary P5 with maxval 255 only.
Plane8 read_pgm(const std::string& path);
Plane8 read_pgm(std::istream& in);
void write_pgm(const Plane8& plane, const std::string& path);
void write_pgm(const Plane8& plane, std::ostream& out);

inline constexpr int kTrainingQps[] = {22, 27, 32, 37};

struct ManifestEntry {
  std::string original_path;   // resolved against the manifest directory
  std::string decoded_path;
  std::string partition_path;
  int qp = 0;
  int width = 0;
  int height = 0;
  int frames = 0;
};

// `<original.yuv> <decoded.yuv> <partition.bpart> <qp> <width> <height> <frames>`
// per line, '#' comments. Relative paths resolve against base_dir.
std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::string& base_dir);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Existence and size consistency of every referenced file.
void check_manifest_entry(const ManifestEntry& entry);

struct PatchPair {
  Plane8 decoded;
  Plane8 original;
  std::vector<double> mask;  // size*size, normalised
  int frame_id = 0;
  int x = 0;
  int y = 0;
};

// Full size x size windows at multiples of stride, row-major; partial border
// windows are dropped.
std::vector<PatchPair> extract_patches(const Plane8& decoded, const Plane8& original,
                                       const MeanMask& mask, int size = 64, int stride = 64,
                                       int frame_id = 0);

// k distinct frame indices drawn uniformly without replacement, ascending.
std::vector<int> select_frames(uint64_t seed, int frame_count, int k = 4);

// Seed for frame selection of one (clip, qp) pair.
uint64_t clip_seed(uint64_t base_seed, size_t clip_index, int qp);

struct DatasetOptions {
  int qp = 22;
  uint64_t seed = 0;
  int frames_per_clip = 4;
  int patch_size = 64;
  int stride = 64;
};

// Patches for every manifest entry with the requested qp: frames chosen by
// select_frames, masks rendered per whole decoded frame, then cut.
std::vector<PatchPair> build_patch_dataset(const std::vector<ManifestEntry>& manifest,
                                           const DatasetOptions& options);

}  // namespace bdrrn
