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

#include "bdrrn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "bdrrn/error.hpp"

namespace bdrrn {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->data = std::move(data);
  node->leaf = false;
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

// Upper bound on im2col tile size, in doubles.
constexpr int64_t kColumnBudget = int64_t{1} << 21;

// Column matrix for output rows [row0, row0 + rows): entry (ci*9 + ky*3 + kx, r*w + x)
// holds input(ci, row0 + r + ky - 1, x + kx - 1), zero outside the plane.
void im2col(const double* plane_base, int64_t cin, int64_t h, int64_t w, int64_t row0,
            int64_t rows, double* col) {
  const int64_t tile = rows * w;
  for (int64_t ci = 0; ci < cin; ++ci) {
    const double* src = plane_base + ci * h * w;
    for (int64_t ky = 0; ky < 3; ++ky) {
      for (int64_t kx = 0; kx < 3; ++kx) {
        double* dst = col + ((ci * 9) + ky * 3 + kx) * tile;
        const int64_t dx = kx - 1;
        for (int64_t r = 0; r < rows; ++r) {
          const int64_t sy = row0 + r + ky - 1;
          double* out = dst + r * w;
          if (sy < 0 || sy >= h) {
            std::fill(out, out + w, 0.0);
            continue;
          }
          const double* in = src + sy * w;
          if (dx == 0) {
            std::memcpy(out, in, sizeof(double) * static_cast<size_t>(w));
          } else if (dx < 0) {
            out[0] = 0.0;
            if (w > 1) std::memcpy(out + 1, in, sizeof(double) * static_cast<size_t>(w - 1));
          } else {
            if (w > 1) std::memcpy(out, in + 1, sizeof(double) * static_cast<size_t>(w - 1));
            out[w - 1] = 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds a column matrix back into the planes.
void col2im_add(const double* col, int64_t cin, int64_t h, int64_t w, int64_t row0, int64_t rows,
                double* plane_base) {
  const int64_t tile = rows * w;
  for (int64_t ci = 0; ci < cin; ++ci) {
    double* dst = plane_base + ci * h * w;
    for (int64_t ky = 0; ky < 3; ++ky) {
      for (int64_t kx = 0; kx < 3; ++kx) {
        const double* src = col + ((ci * 9) + ky * 3 + kx) * tile;
        const int64_t dx = kx - 1;
        for (int64_t r = 0; r < rows; ++r) {
          const int64_t sy = row0 + r + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const double* in = src + r * w;
          double* out = dst + sy * w;
          const int64_t x_begin = std::max<int64_t>(0, -dx);
          const int64_t x_end = std::min<int64_t>(w, w - dx);
          for (int64_t x = x_begin; x < x_end; ++x) out[x + dx] += in[x];
        }
      }
    }
  }
}

int64_t rows_per_tile(int64_t k, int64_t h, int64_t w) {
  return std::clamp<int64_t>(kColumnBudget / std::max<int64_t>(1, k * w), 1, std::max<int64_t>(1, h));
}

}  // namespace

Tensor conv3x3(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (ws.h != 3 || ws.w != 3) throw ShapeError("conv3x3: weight must be [cout,cin,3,3], got " + ws.str());
  if (ws.c != is.c) {
    throw ShapeError("conv3x3: input has " + std::to_string(is.c) + " channels but weight expects " +
                     std::to_string(ws.c));
  }
  if (bias.shape() != Shape{ws.n, 1, 1, 1}) {
    throw ShapeError("conv3x3: bias must be [" + std::to_string(ws.n) + ",1,1,1], got " +
                     bias.shape().str());
  }
  if (is.h < 1 || is.w < 1) throw ShapeError("conv3x3: empty spatial extent " + is.str());

  const int64_t n = is.n, cin = is.c, h = is.h, w = is.w, cout = ws.n;
  const int64_t k = cin * 9, hw = h * w;
  const int64_t tile_rows = rows_per_tile(k, h, w);
  Shape out_shape{n, cout, h, w};
  std::vector<double> out(static_cast<size_t>(out_shape.numel()));
  std::vector<double> col(static_cast<size_t>(k * tile_rows * w));

  Eigen::Map<const RowMat> wmat(weight.data().data(), cout, k);
  const double* bptr = bias.data().data();
  const double* in = input.data().data();
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t row0 = 0; row0 < h; row0 += tile_rows) {
      const int64_t rows = std::min(tile_rows, h - row0);
      const int64_t tile = rows * w;
      im2col(in + b * cin * hw, cin, h, w, row0, rows, col.data());
      Eigen::Map<const RowMat> cmat(col.data(), k, tile);
      StridedMap omat(out.data() + b * cout * hw + row0 * w, cout, tile, Eigen::OuterStride<>(hw));
      omat.noalias() = wmat * cmat;
      for (int64_t co = 0; co < cout; ++co) omat.row(co).array() += bptr[co];
    }
  }

  return make_result(out_shape, std::move(out), {input, weight, bias}, [=](Node& self) {
    Node& in_node = *self.parents[0];
    Node& w_node = *self.parents[1];
    Node& b_node = *self.parents[2];
    const double* gy = self.grad.data();
    std::vector<double> colbuf(static_cast<size_t>(k * tile_rows * w));
    Eigen::Map<const RowMat> wm(w_node.data.data(), cout, k);
    double* gw = w_node.requires_grad ? w_node.grad_buffer().data() : nullptr;
    double* gx = in_node.requires_grad ? in_node.grad_buffer().data() : nullptr;
    if (b_node.requires_grad) {
      auto& gb = b_node.grad_buffer();
      for (int64_t b = 0; b < n; ++b) {
        for (int64_t co = 0; co < cout; ++co) {
          const double* g = gy + (b * cout + co) * hw;
          double s = 0.0;
          for (int64_t i = 0; i < hw; ++i) s += g[i];
          gb[static_cast<size_t>(co)] += s;
        }
      }
    }
    if (!gw && !gx) return;
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t row0 = 0; row0 < h; row0 += tile_rows) {
        const int64_t rows = std::min(tile_rows, h - row0);
        const int64_t tile = rows * w;
        ConstStridedMap gmat(gy + b * cout * hw + row0 * w, cout, tile, Eigen::OuterStride<>(hw));
        if (gw) {
          im2col(in_node.data.data() + b * cin * hw, cin, h, w, row0, rows, colbuf.data());
          Eigen::Map<const RowMat> cmat(colbuf.data(), k, tile);
          Eigen::Map<RowMat> gwm(gw, cout, k);
          gwm.noalias() += gmat * cmat.transpose();
        }
        if (gx) {
          Eigen::Map<RowMat> dcol(colbuf.data(), k, tile);
          dcol.noalias() = wm.transpose() * gmat;
          col2im_add(colbuf.data(), cin, h, w, row0, rows, gx + b * cin * hw);
        }
      }
    }
  });
}

namespace {
thread_local ReluPatternProbe* active_probe = nullptr;
}  // namespace

ReluPatternProbe::ReluPatternProbe() {
  if (active_probe != nullptr) throw Error("ReluPatternProbe: a probe is already active on this thread");
  active_probe = this;
}

ReluPatternProbe::~ReluPatternProbe() { active_probe = nullptr; }

void ReluPatternProbe::record(std::span<const double> values) {
  for (double v : values) hash_ = (hash_ ^ static_cast<uint64_t>(v > 0.0)) * 0x100000001b3ULL;
}

Tensor relu(const Tensor& input) {
  auto src = input.data();
  if (active_probe != nullptr) active_probe->record(src);
  std::vector<double> out(src.size());
  for (size_t i = 0; i < src.size(); ++i) out[i] = src[i] > 0.0 ? src[i] : 0.0;
  return make_result(input.shape(), std::move(out), {input}, [](Node& self) {
    Node& in = *self.parents[0];
    auto& g = in.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) {
      if (in.data[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      auto& g = parent->grad_buffer();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: batch/spatial mismatch " + sa.str() + " vs " + sb.str());
  }
  const int64_t hw = sa.plane();
  const int64_t ca = sa.c * hw, cb = sb.c * hw;
  Shape out_shape{sa.n, sa.c + sb.c, sa.h, sa.w};
  std::vector<double> out(static_cast<size_t>(out_shape.numel()));
  auto x = a.data();
  auto y = b.data();
  for (int64_t i = 0; i < sa.n; ++i) {
    std::copy_n(x.data() + i * ca, ca, out.data() + i * (ca + cb));
    std::copy_n(y.data() + i * cb, cb, out.data() + i * (ca + cb) + ca);
  }
  return make_result(out_shape, std::move(out), {a, b}, [=](Node& self) {
    const int64_t n = self.shape.n;
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (int64_t i = 0; i < n; ++i) {
      const double* g = self.grad.data() + i * (ca + cb);
      if (pa.requires_grad) {
        double* ga = pa.grad_buffer().data() + i * ca;
        for (int64_t j = 0; j < ca; ++j) ga[j] += g[j];
      }
      if (pb.requires_grad) {
        double* gb = pb.grad_buffer().data() + i * cb;
        for (int64_t j = 0; j < cb; ++j) gb[j] += g[ca + j];
      }
    }
  });
}

Tensor channel_slice(const Tensor& input, int64_t begin, int64_t end) {
  const Shape& s = input.shape();
  if (begin < 0 || end > s.c || begin >= end) {
    throw ShapeError("channel_slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + s.str());
  }
  const int64_t hw = s.plane();
  Shape out_shape{s.n, end - begin, s.h, s.w};
  std::vector<double> out(static_cast<size_t>(out_shape.numel()));
  auto src = input.data();
  for (int64_t i = 0; i < s.n; ++i) {
    std::copy_n(src.data() + (i * s.c + begin) * hw, (end - begin) * hw,
                out.data() + i * (end - begin) * hw);
  }
  return Tensor::from_data(out_shape, std::move(out));
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  if (target.requires_grad()) throw Error("mse_loss: target must not require a gradient");
  auto p = pred.data();
  auto t = target.data();
  const auto count = static_cast<double>(p.size());
  double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    sum += d * d;
  }
  std::vector<double> out{sum / count};
  return make_result(Shape{1, 1, 1, 1}, std::move(out), {pred, target}, [count](Node& self) {
    Node& pn = *self.parents[0];
    const Node& tn = *self.parents[1];
    const double scale = 2.0 * self.grad[0] / count;
    auto& g = pn.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) g[i] += scale * (pn.data[i] - tn.data[i]);
  });
}

namespace {

void check_batchnorm_args(const Tensor& input, const Tensor& gamma, const Tensor& beta) {
  if (input.shape().c != 1) {
    throw ShapeError("batchnorm_input: expects a single-channel input, got " + input.shape().str());
  }
  if (gamma.shape() != Shape{1, 1, 1, 1} || beta.shape() != Shape{1, 1, 1, 1}) {
    throw ShapeError("batchnorm_input: gamma and beta must be [1,1,1,1]");
  }
  if (input.numel() == 0) throw ShapeError("batchnorm_input: empty input");
}

Tensor normalize(const Tensor& input, const Tensor& gamma, const Tensor& beta, double mean,
                 double inv_std, bool batch_stats) {
  auto x = input.data();
  const double g = gamma.item();
  const double bshift = beta.item();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv_std * g + bshift;

  return make_result(input.shape(), std::move(out), {input, gamma, beta},
                     [mean, inv_std, batch_stats](Node& self) {
    Node& in = *self.parents[0];
    Node& gn = *self.parents[1];
    Node& bn = *self.parents[2];
    const auto count = static_cast<double>(in.data.size());
    const std::vector<double>& dy = self.grad;
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (size_t i = 0; i < dy.size(); ++i) {
      sum_dy += dy[i];
      sum_dy_xhat += dy[i] * (in.data[i] - mean) * inv_std;
    }
    if (gn.requires_grad) gn.grad_buffer()[0] += sum_dy_xhat;
    if (bn.requires_grad) bn.grad_buffer()[0] += sum_dy;
    if (!in.requires_grad) return;
    auto& gx = in.grad_buffer();
    const double g = gn.data[0];
    if (batch_stats) {
      // dx = g*inv_std/N * (N*dy - sum(dy) - xhat*sum(dy*xhat))
      const double k = g * inv_std / count;
      for (size_t i = 0; i < gx.size(); ++i) {
        const double xhat = (in.data[i] - mean) * inv_std;
        gx[i] += k * (count * dy[i] - sum_dy - xhat * sum_dy_xhat);
      }
    } else {
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += dy[i] * g * inv_std;
    }
  });
}

}  // namespace

Tensor batchnorm_input(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                       BatchNormStats& stats, BatchNormMode mode) {
  if (mode == BatchNormMode::Eval) {
    return batchnorm_input(input, gamma, beta, static_cast<const BatchNormStats&>(stats));
  }
  check_batchnorm_args(input, gamma, beta);
  auto x = input.data();
  const auto count = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= count;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= count;

  stats.running_mean = BatchNormStats::kDecay * stats.running_mean + (1.0 - BatchNormStats::kDecay) * mean;
  stats.running_var = BatchNormStats::kDecay * stats.running_var + (1.0 - BatchNormStats::kDecay) * var;
  stats.available = true;
  return normalize(input, gamma, beta, mean, 1.0 / std::sqrt(var + BatchNormStats::kEpsilon), true);
}

Tensor batchnorm_input(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                       const BatchNormStats& stats) {
  check_batchnorm_args(input, gamma, beta);
  if (!stats.available) {
    throw Error("batchnorm_input: Eval mode requested but no running statistics are available");
  }
  return normalize(input, gamma, beta, stats.running_mean,
                   1.0 / std::sqrt(stats.running_var + BatchNormStats::kEpsilon), false);
}

}  // namespace bdrrn
