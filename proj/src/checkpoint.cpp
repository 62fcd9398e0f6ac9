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

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "bdrrn/model.hpp"

namespace bdrrn {

namespace {

using Kind = CheckpointError::Kind;

constexpr char kMagic[4] = {'B', 'D', 'R', 'N'};

const char* const kInputMean = "bn.input.running_mean";
const char* const kInputVar = "bn.input.running_var";
const char* const kMaskMean = "bn.mask.running_mean";
const char* const kMaskVar = "bn.mask.running_var";

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  template <typename T>
  void put(T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out_.append(reinterpret_cast<const char*>(bytes), sizeof(T));
  }
  void put_bytes(const std::string& s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }
  std::string get_bytes(size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(Kind::Truncated, std::string("checkpoint truncated while reading ") + what);
    }
  }
  const std::string& bytes_;
  size_t pos_ = 0;
};

// Stored dims drop trailing unit axes (bias [c,1,1,1] -> [c]).
std::vector<uint32_t> stored_dims(const Shape& s) {
  std::vector<uint32_t> dims{static_cast<uint32_t>(s.n), static_cast<uint32_t>(s.c),
                             static_cast<uint32_t>(s.h), static_cast<uint32_t>(s.w)};
  while (dims.size() > 1 && dims.back() == 1) dims.pop_back();
  return dims;
}

struct StoredTensor {
  std::vector<uint32_t> dims;
  std::vector<double> data;
};

std::map<std::string, StoredTensor> collect(const Model& m) {
  std::map<std::string, StoredTensor> out;
  for (const auto& [name, p] : m.parameters()) {
    auto d = p.value.data();
    out[name] = StoredTensor{stored_dims(p.value.shape()), std::vector<double>(d.begin(), d.end())};
  }
  auto scalar = [](double v) { return StoredTensor{{1}, {v}}; };
  out[kInputMean] = scalar(m.input_stats().running_mean);
  out[kInputVar] = scalar(m.input_stats().running_var);
  if (m.config().uses_mask()) {
    out[kMaskMean] = scalar(m.mask_stats().running_mean);
    out[kMaskVar] = scalar(m.mask_stats().running_var);
  }
  return out;
}

ModelConfig read_config(Reader& r) {
  ModelConfig cfg;
  const auto variant = r.get<uint8_t>("config");
  const auto fusion = r.get<uint8_t>("config");
  const auto channels = r.get<uint32_t>("config");
  const auto main_iters = r.get<uint32_t>("config");
  const auto extra_iters = r.get<uint32_t>("config");
  const auto merge_iters = r.get<uint32_t>("config");
  if (variant > 1 || fusion > 1) throw CheckpointError(Kind::BadConfig, "checkpoint has an unknown variant/fusion code");
  constexpr uint32_t kLimit = 1u << 20;
  if (channels > kLimit || main_iters > kLimit || extra_iters > kLimit || merge_iters > kLimit) {
    throw CheckpointError(Kind::BadConfig, "checkpoint config values out of range");
  }
  cfg.variant = static_cast<Variant>(variant);
  cfg.fusion = static_cast<Fusion>(fusion);
  cfg.channels = static_cast<int>(channels);
  cfg.main_iters = static_cast<int>(main_iters);
  cfg.extra_iters = static_cast<int>(extra_iters);
  cfg.merge_iters = static_cast<int>(merge_iters);
  try {
    cfg.validate();
  } catch (const InputError& e) {
    throw CheckpointError(Kind::BadConfig, std::string("checkpoint config invalid: ") + e.what());
  }
  return cfg;
}

struct Parsed {
  ModelConfig config;
  std::map<std::string, StoredTensor> tensors;
};

Parsed parse(const std::string& bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(Kind::BadMagic, "not a checkpoint (magic mismatch)");
  }
  Reader r(bytes);
  r.get_bytes(4, "magic");
  const auto version = r.get<uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::UnsupportedVersion, "unsupported checkpoint version " + std::to_string(version));
  }
  Parsed parsed;
  parsed.config = read_config(r);
  const auto count = r.get<uint32_t>("tensor count");
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<uint16_t>("tensor name");
    std::string name = r.get_bytes(name_len, "tensor name");
    const auto ndim = r.get<uint8_t>("tensor rank");
    if (ndim < 1 || ndim > 4) throw CheckpointError(Kind::ShapeMismatch, "tensor '" + name + "' has rank " + std::to_string(ndim));
    StoredTensor t;
    uint64_t numel = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      t.dims.push_back(r.get<uint32_t>("tensor dims"));
      numel *= t.dims.back();
    }
    if (numel * sizeof(double) > bytes.size()) {
      throw CheckpointError(Kind::Truncated, "checkpoint truncated in tensor '" + name + "'");
    }
    t.data.resize(static_cast<size_t>(numel));
    for (auto& v : t.data) v = r.get<double>("tensor data");
    if (!parsed.tensors.emplace(name, std::move(t)).second) {
      throw CheckpointError(Kind::UnexpectedTensor, "duplicate tensor '" + name + "'");
    }
  }
  if (!r.done()) throw CheckpointError(Kind::TrailingData, "unexpected bytes after the last tensor");
  return parsed;
}

Model materialize(const Parsed& parsed, const ModelConfig& target) {
  Model model(target, 0);
  std::map<std::string, bool> used;
  for (const auto& [name, _] : parsed.tensors) used[name] = false;

  for (auto& [name, p] : model.parameters()) {
    auto it = parsed.tensors.find(name);
    if (it == parsed.tensors.end()) throw CheckpointError(Kind::MissingTensor, "checkpoint lacks tensor '" + name + "'");
    if (it->second.dims != stored_dims(p.value.shape())) {
      throw CheckpointError(Kind::ShapeMismatch, "tensor '" + name + "' shape does not match " + describe(target));
    }
    auto dst = p.value.mutable_data();
    std::copy(it->second.data.begin(), it->second.data.end(), dst.begin());
    used[name] = true;
  }

  auto load_stats = [&](const char* mean_name, const char* var_name, BatchNormStats& stats) {
    auto m = parsed.tensors.find(mean_name);
    auto v = parsed.tensors.find(var_name);
    if (m == parsed.tensors.end() || v == parsed.tensors.end()) return;
    for (auto* t : {&m->second, &v->second}) {
      if (t->dims != std::vector<uint32_t>{1}) {
        throw CheckpointError(Kind::ShapeMismatch, std::string("running statistic '") + mean_name + "' must be scalar");
      }
    }
    stats.running_mean = m->second.data[0];
    stats.running_var = v->second.data[0];
    stats.available = true;
    used[mean_name] = used[var_name] = true;
  };
  load_stats(kInputMean, kInputVar, model.input_stats());
  if (target.uses_mask()) load_stats(kMaskMean, kMaskVar, model.mask_stats());

  for (const auto& [name, was_used] : used) {
    if (!was_used) {
      throw CheckpointError(Kind::UnexpectedTensor, "checkpoint tensor '" + name + "' is not used by " + describe(target));
    }
  }
  return model;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::Io, "cannot open checkpoint '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

std::string serialize_checkpoint(const Model& m) {
  Writer w;
  w.put_bytes(std::string(kMagic, 4));
  w.put<uint32_t>(kCheckpointVersion);
  const auto& cfg = m.config();
  w.put<uint8_t>(static_cast<uint8_t>(cfg.variant));
  w.put<uint8_t>(static_cast<uint8_t>(cfg.fusion));
  w.put<uint32_t>(static_cast<uint32_t>(cfg.channels));
  w.put<uint32_t>(static_cast<uint32_t>(cfg.main_iters));
  w.put<uint32_t>(static_cast<uint32_t>(cfg.extra_iters));
  w.put<uint32_t>(static_cast<uint32_t>(cfg.merge_iters));
  const auto tensors = collect(m);
  w.put<uint32_t>(static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.put<uint16_t>(static_cast<uint16_t>(name.size()));
    w.put_bytes(name);
    w.put<uint8_t>(static_cast<uint8_t>(t.dims.size()));
    for (uint32_t d : t.dims) w.put<uint32_t>(d);
    for (double v : t.data) w.put<double>(v);
  }
  return w.take();
}

void save_checkpoint(const Model& m, const std::string& path) {
  const std::string bytes = serialize_checkpoint(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::Io, "cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::Io, "write failed for '" + path + "'");
}

Model deserialize_checkpoint(const std::string& bytes) {
  const Parsed parsed = parse(bytes);
  return materialize(parsed, parsed.config);
}

Model load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

Model load_checkpoint_as(const std::string& path, const ModelConfig& target) {
  target.validate();
  return materialize(parse(read_file(path)), target);
}

}  // namespace bdrrn
