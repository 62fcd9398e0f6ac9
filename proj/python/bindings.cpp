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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bdrrn/data_io.hpp"
#include "bdrrn/gradcheck.hpp"
#include "bdrrn/metrics.hpp"
#include "bdrrn/model.hpp"
#include "bdrrn/partition.hpp"
#include "bdrrn/training.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace bdrrn;

namespace {

using U8Array = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Plane8 to_plane(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D uint8 array (height, width)");
  Plane8 p(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy_n(a.data(), p.size(), p.pixels.begin());
  return p;
}

U8Array from_plane(const Plane8& p) {
  U8Array out({p.height, p.width});
  std::copy(p.pixels.begin(), p.pixels.end(), out.mutable_data());
  return out;
}

FramePartition to_partition(int width, int height, const std::vector<std::tuple<int, int, int>>& cus) {
  FramePartition p{width, height, {}};
  for (const auto& [x, y, s] : cus) p.cus.push_back(CUSquare{x, y, s});
  return p;
}

std::vector<std::tuple<int, int, int>> from_partition(const FramePartition& p) {
  std::vector<std::tuple<int, int, int>> out;
  for (const auto& cu : p.cus) out.emplace_back(cu.x, cu.y, cu.size);
  return out;
}

ModelConfig make_config(const std::string& variant, const std::string& fusion, int channels, int main_iters,
                        int extra_iters, int merge_iters) {
  ModelConfig cfg;
  if (variant == "drrn") cfg.variant = Variant::Drrn;
  else if (variant == "bdrrn") cfg.variant = Variant::Bdrrn;
  else throw py::value_error("variant must be 'drrn' or 'bdrrn'");
  if (fusion == "add") cfg.fusion = Fusion::Add;
  else if (fusion == "concat") cfg.fusion = Fusion::Concat;
  else throw py::value_error("fusion must be 'add' or 'concat'");
  cfg.channels = channels;
  cfg.main_iters = main_iters;
  cfg.extra_iters = extra_iters;
  cfg.merge_iters = merge_iters;
  cfg.validate();
  return cfg;
}

RDCurve to_curve(const std::vector<std::pair<double, double>>& points) {
  std::vector<RDPoint> pts;
  for (const auto& [rate, db] : points) pts.push_back(RDPoint{rate, db});
  return RDCurve(std::move(pts));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mask-guided recursive residual network for compressed-video enhancement";

  // Translators run newest first, so the base class is registered first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  m.def("param_count", [](const std::string& variant, const std::string& fusion, int channels, int main_iters,
                          int extra_iters, int merge_iters) {
          return param_count(make_config(variant, fusion, channels, main_iters, extra_iters, merge_iters));
        },
        py::arg("variant") = "bdrrn", py::arg("fusion") = "add", py::arg("channels") = 64,
        py::arg("main_iters") = 9, py::arg("extra_iters") = 3, py::arg("merge_iters") = 2,
        "Learnable parameters of a configuration; shared layers count once.");

  m.def("psnr", [](const U8Array& a, const U8Array& b) { return psnr(to_plane(a), to_plane(b)); },
        "PSNR in dB of two 8-bit planes; inf when identical.");

  m.def("bd_rate", [](const std::vector<std::pair<double, double>>& anchor,
                      const std::vector<std::pair<double, double>>& test) {
          return bd_rate(to_curve(anchor), to_curve(test)).bd_rate_percent;
        },
        py::arg("anchor"), py::arg("test"),
        "BD-rate percent of `test` against `anchor`, each a list of (rate_kbps, psnr_db).");

  m.def("random_quadtree", [](uint64_t seed, int width, int height, double split_prob) {
          return from_partition(random_quadtree(seed, width, height, split_prob));
        },
        py::arg("seed"), py::arg("width"), py::arg("height"), py::arg("split_prob"),
        "Random CU partition as a list of (x, y, size).");

  m.def("validate_tiling", [](int width, int height, const std::vector<std::tuple<int, int, int>>& cus) {
          validate_tiling(to_partition(width, height, cus));
        });

  m.def("mean_mask", [](const U8Array& decoded, const std::vector<std::tuple<int, int, int>>& cus) {
          const Plane8 plane = to_plane(decoded);
          const MeanMask mask = mean_mask(plane, to_partition(plane.width, plane.height, cus));
          F64Array out({mask.height, mask.width});
          std::copy(mask.values.begin(), mask.values.end(), out.mutable_data());
          return out;
        },
        "Per-CU mean of the decoded frame, normalised to [0, 1].");

  m.def("synth_degrade", [](const U8Array& original, const std::vector<std::tuple<int, int, int>>& cus, int qstep) {
          const Plane8 plane = to_plane(original);
          return from_plane(synth_degrade(plane, to_partition(plane.width, plane.height, cus), qstep));
        });

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& variant, const std::string& fusion, int channels, int main_iters,
                       int extra_iters, int merge_iters, uint64_t seed) {
             return Model(make_config(variant, fusion, channels, main_iters, extra_iters, merge_iters), seed);
           }),
           py::arg("variant") = "bdrrn", py::arg("fusion") = "add", py::arg("channels") = 64,
           py::arg("main_iters") = 9, py::arg("extra_iters") = 3, py::arg("merge_iters") = 2, py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return load_checkpoint(path); })
      .def("save", [](const Model& self, const std::string& path) { save_checkpoint(self, path); })
      .def_property_readonly("param_count", &Model::param_count)
      .def_property_readonly("parameter_names", [](const Model& self) { return self.parameters().names(); })
      .def_property_readonly("variant", [](const Model& self) { return to_string(self.config().variant); })
      .def("zero_reconstruction", &Model::zero_reconstruction)
      .def("set_running_stats", [](Model& self, double mean, double var) {
             for (auto* s : {&self.input_stats(), &self.mask_stats()}) {
               s->running_mean = mean;
               s->running_var = var;
               s->available = true;
             }
           }, py::arg("mean"), py::arg("var"))
      .def("enhance", [](const Model& self, const U8Array& decoded,
                         std::optional<std::vector<std::tuple<int, int, int>>> cus) {
             const Plane8 plane = to_plane(decoded);
             std::optional<FramePartition> p;
             if (cus) p = to_partition(plane.width, plane.height, *cus);
             Plane8 out;
             {
               py::gil_scoped_release release;
               out = enhance_frame(self, plane, p ? &*p : nullptr);
             }
             return from_plane(out);
           },
           py::arg("decoded"), py::arg("partition") = std::nullopt,
           "Whole-frame enhancement; partition is required for bdrrn models.");

  m.def("gradient_check", [](const std::string& variant, const std::string& fusion, int channels, int size,
                             uint64_t seed) {
          GradCheckOptions opts;
          opts.config = make_config(variant, fusion, channels, 9, 3, 2);
          opts.width = opts.height = size;
          opts.seed = seed;
          return gradient_check(opts).max_relative_error;
        },
        py::arg("variant") = "bdrrn", py::arg("fusion") = "add", py::arg("channels") = 4, py::arg("size") = 16,
        py::arg("seed") = 1);

#ifdef VERSION_INFO
  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
