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

#include "bdrrn/partition.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace bdrrn {

Region clip(const CUSquare& cu, int width, int height) {
  return Region{cu.x, cu.y, std::min(cu.x + cu.size, width), std::min(cu.y + cu.size, height)};
}

namespace {

std::string at_pixel(int x, int y) {
  return "(" + std::to_string(x) + "," + std::to_string(y) + ")";
}

std::string describe(const CUSquare& cu) {
  return "cu " + std::to_string(cu.x) + " " + std::to_string(cu.y) + " " + std::to_string(cu.size);
}

}  // namespace

void validate_tiling(const FramePartition& p) {
  using Kind = TilingError::Kind;
  if (p.width <= 0 || p.height <= 0) {
    throw TilingError(Kind::Dimensions, 0, 0,
                      "partition has non-positive dimensions " + std::to_string(p.width) + "x" +
                          std::to_string(p.height));
  }
  for (const auto& cu : p.cus) {
    if (!is_valid_cu_size(cu.size)) {
      throw TilingError(Kind::BadSize, cu.x, cu.y,
                        describe(cu) + ": size must be one of 8, 16, 32, 64");
    }
    if (cu.x < 0 || cu.y < 0 || cu.x % cu.size != 0 || cu.y % cu.size != 0) {
      throw TilingError(Kind::Misaligned, cu.x, cu.y,
                        describe(cu) + ": misaligned at " + at_pixel(cu.x, cu.y) +
                            ", position must be a multiple of the size");
    }
    if (cu.x >= p.width || cu.y >= p.height) {
      throw TilingError(Kind::OutOfFrame, cu.x, cu.y,
                        describe(cu) + ": starts outside the " + std::to_string(p.width) + "x" +
                            std::to_string(p.height) + " frame");
    }
  }

  std::vector<uint8_t> covered(static_cast<size_t>(p.width) * p.height, 0);
  for (const auto& cu : p.cus) {
    const Region r = clip(cu, p.width, p.height);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        auto& c = covered[static_cast<size_t>(y) * p.width + x];
        if (c) {
          throw TilingError(Kind::Overlap, x, y,
                            describe(cu) + ": overlaps an earlier CU at " + at_pixel(x, y));
        }
        c = 1;
      }
    }
  }
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      if (!covered[static_cast<size_t>(y) * p.width + x]) {
        throw TilingError(Kind::Gap, x, y, "pixel " + at_pixel(x, y) + " is not covered by any CU");
      }
    }
  }
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::string body = line.substr(0, line.find('#'));
  std::istringstream ss(body);
  std::vector<std::string> tokens;
  for (std::string t; ss >> t;) tokens.push_back(t);
  return tokens;
}

int to_int(const std::string& token, const char* field, int line) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(std::string("expected an integer for ") + field + ", got '" + token + "'", line);
  }
  return value;
}

}  // namespace

BpartFile parse_partition(std::istream& in) {
  BpartFile file;
  bool have_header = false;
  int line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = tokenize(line);
    if (tok.empty()) continue;

    if (!have_header) {
      if (tok[0] != "BPART") throw ParseError("expected 'BPART <version> <width> <height>' header", line_no);
      if (tok.size() != 4) throw ParseError("header needs version, width and height", line_no);
      file.version = to_int(tok[1], "version", line_no);
      file.width = to_int(tok[2], "width", line_no);
      file.height = to_int(tok[3], "height", line_no);
      if (file.version != 1) {
        throw ParseError("unsupported BPART version " + std::to_string(file.version), line_no);
      }
      if (file.width <= 0 || file.height <= 0) throw ParseError("frame dimensions must be positive", line_no);
      have_header = true;
      continue;
    }

    if (tok[0] == "frame") {
      if (tok.size() != 2) throw ParseError("'frame' takes exactly one index", line_no);
      const int index = to_int(tok[1], "frame index", line_no);
      if (index != static_cast<int>(file.frames.size())) {
        throw ParseError("expected frame " + std::to_string(file.frames.size()) + ", got " +
                             std::to_string(index),
                         line_no);
      }
      file.frames.push_back(FramePartition{file.width, file.height, {}});
    } else if (tok[0] == "cu") {
      if (file.frames.empty()) throw ParseError("'cu' before any 'frame' line", line_no);
      if (tok.size() != 4) throw ParseError("'cu' takes x, y and size", line_no);
      CUSquare cu{to_int(tok[1], "x", line_no), to_int(tok[2], "y", line_no),
                  to_int(tok[3], "size", line_no)};
      if (!is_valid_cu_size(cu.size)) {
        throw ParseError("invalid CU size " + std::to_string(cu.size) + " (allowed: 8, 16, 32, 64)",
                         line_no);
      }
      if (cu.x < 0 || cu.y < 0) throw ParseError("negative CU coordinate", line_no);
      file.frames.back().cus.push_back(cu);
    } else {
      throw ParseError("unknown directive '" + tok[0] + "'", line_no);
    }
  }
  if (!have_header) throw ParseError("missing BPART header (dimensions missing)", 0);

  for (size_t i = 0; i < file.frames.size(); ++i) {
    try {
      validate_tiling(file.frames[i]);
    } catch (const TilingError& e) {
      throw TilingError(e.kind(), e.x(), e.y(), "frame " + std::to_string(i) + ": " + e.what());
    }
  }
  return file;
}

BpartFile read_partition_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open partition file '" + path + "'");
  try {
    return parse_partition(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

void write_partition(std::ostream& out, const BpartFile& file) {
  out << "BPART " << file.version << ' ' << file.width << ' ' << file.height << '\n';
  for (size_t i = 0; i < file.frames.size(); ++i) {
    out << "frame " << i << '\n';
    for (const auto& cu : file.frames[i].cus) {
      out << "cu " << cu.x << ' ' << cu.y << ' ' << cu.size << '\n';
    }
  }
}

void write_partition_file(const std::string& path, const BpartFile& file) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write partition file '" + path + "'");
  write_partition(out, file);
  if (!out) throw IoError("write failed for '" + path + "'");
}

namespace {

void require_matching(const Plane8& plane, const FramePartition& p) {
  if (plane.width != p.width || plane.height != p.height) {
    throw TilingError(TilingError::Kind::Dimensions, 0, 0,
                      "frame is " + std::to_string(plane.width) + "x" + std::to_string(plane.height) +
                          " but partition is " + std::to_string(p.width) + "x" +
                          std::to_string(p.height));
  }
}

int64_t region_sum(const Plane8& plane, const Region& r) {
  int64_t sum = 0;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) sum += plane.at(x, y);
  }
  return sum;
}

}  // namespace

MeanMask mean_mask(const Plane8& decoded, const FramePartition& partition) {
  require_matching(decoded, partition);
  MeanMask mask{decoded.width, decoded.height,
                std::vector<double>(decoded.size(), 0.0)};
  for (const auto& cu : partition.cus) {
    const Region r = clip(cu, decoded.width, decoded.height);
    const double value =
        static_cast<double>(region_sum(decoded, r)) / (255.0 * static_cast<double>(r.area()));
    for (int y = r.y0; y < r.y1; ++y) {
      std::fill_n(mask.values.begin() + static_cast<ptrdiff_t>(y) * mask.width + r.x0, r.x1 - r.x0, value);
    }
  }
  return mask;
}

Plane8 quantize_mask(const MeanMask& mask) {
  Plane8 out(mask.width, mask.height);
  for (size_t i = 0; i < mask.values.size(); ++i) {
    out.pixels[i] = static_cast<uint8_t>(std::clamp(std::lround(mask.values[i] * 255.0), 0L, 255L));
  }
  return out;
}

namespace {

void split_square(std::mt19937_64& rng, double split_prob, int x, int y, int size,
                  FramePartition& out) {
  if (x >= out.width || y >= out.height) return;
  std::bernoulli_distribution split(split_prob);
  if (size > kMinCuSize && split(rng)) {
    const int half = size / 2;
    split_square(rng, split_prob, x, y, half, out);
    split_square(rng, split_prob, x + half, y, half, out);
    split_square(rng, split_prob, x, y + half, half, out);
    split_square(rng, split_prob, x + half, y + half, half, out);
    return;
  }
  out.cus.push_back(CUSquare{x, y, size});
}

}  // namespace

FramePartition random_quadtree(uint64_t seed, int width, int height, double split_prob) {
  if (!(split_prob >= 0.0 && split_prob <= 1.0)) throw InputError("split_prob must lie in [0, 1]");
  if (width <= 0 || height <= 0) throw InputError("frame dimensions must be positive");
  FramePartition p{width, height, {}};
  std::mt19937_64 rng(seed);
  for (int y = 0; y < height; y += kCtuSize) {
    for (int x = 0; x < width; x += kCtuSize) split_square(rng, split_prob, x, y, kCtuSize, p);
  }
  return p;
}

Plane8 synth_degrade(const Plane8& original, const FramePartition& partition, int qstep) {
  if (qstep < 1) throw InputError("qstep must be >= 1, got " + std::to_string(qstep));
  require_matching(original, partition);
  Plane8 out = original;
  for (const auto& cu : partition.cus) {
    const Region r = clip(cu, original.width, original.height);
    const int64_t area = r.area();
    // Integer mean rounded half up.
    const auto m = static_cast<int>((2 * region_sum(original, r) + area) / (2 * area));
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        const double q = std::round(static_cast<double>(original.at(x, y) - m) / qstep);
        const long v = std::lround(q) * qstep + m;
        out.at(x, y) = static_cast<uint8_t>(std::clamp(v, 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace bdrrn
