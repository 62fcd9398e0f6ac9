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

#include "bdrrn/error.hpp"
#include "bdrrn/plane.hpp"

namespace bdrrn {

inline constexpr int kCtuSize = 64;
inline constexpr int kMinCuSize = 8;

// Square coding unit; sizes 8/16/32/64, top-left aligned to its size.
struct CUSquare {
  int x = 0;
  int y = 0;
  int size = 0;
  bool operator==(const CUSquare&) const = default;
};

inline bool is_valid_cu_size(int size) {
  return size == 8 || size == 16 || size == 32 || size == 64;
}

// CUs tile the frame; squares that run past the right/bottom border are
// clipped to it.
struct FramePartition {
  int width = 0;
  int height = 0;
  std::vector<CUSquare> cus;

  bool operator==(const FramePartition&) const = default;
};

// Clipped extent of a CU inside a frame.
struct Region {
  int x0, y0, x1, y1;  // half-open
  int64_t area() const { return int64_t{x1 - x0} * (y1 - y0); }
};
Region clip(const CUSquare& cu, int width, int height);

struct MeanMask {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // normalised to [0,1], row-major

  double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
};

class TilingError : public InputError {
 public:
  enum class Kind { BadSize, Misaligned, OutOfFrame, Overlap, Gap, Dimensions };
  TilingError(Kind kind, int x, int y, const std::string& what)
      : InputError(what), kind_(kind), x_(x), y_(y) {}
  Kind kind() const { return kind_; }
  int x() const { return x_; }
  int y() const { return y_; }

 private:
  Kind kind_;
  int x_, y_;
};

// Accepts iff every CU has an allowed size, is aligned to it, starts inside
// the frame, and the clipped CUs cover every pixel exactly once. Throws
// TilingError describing the first violation.
void validate_tiling(const FramePartition& partition);

// Parsed BPART stream: one partition per declared frame, in frame order.
struct BpartFile {
  int version = 1;
  int width = 0;
  int height = 0;
  std::vector<FramePartition> frames;
};

// Parses and validates every frame. ParseError carries the offending line.
BpartFile parse_partition(std::istream& in);
BpartFile read_partition_file(const std::string& path);
void write_partition(std::ostream& out, const BpartFile& file);
void write_partition_file(const std::string& path, const BpartFile& file);

// Per clipped CU, every pixel gets sum(pixels) / (255 * area).
MeanMask mean_mask(const Plane8& decoded, const FramePartition& partition);

// 8-bit rendering of a mask for inspection.
Plane8 quantize_mask(const MeanMask& mask);

// Quadtree per 64x64 CTU, each square split with probability split_prob down
// to 8x8. Squares that fall entirely outside the frame are dropped.
FramePartition random_quadtree(uint64_t seed, int width, int height, double split_prob);

// Partition-aligned quantisation of each CU's residual around its rounded mean.
Plane8 synth_degrade(const Plane8& original, const FramePartition& partition, int qstep);

}  // namespace bdrrn
