/* Copyright 2026 The EgoNet Authors. All Rights Reserved.

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
#include <pybind11/stl/filesystem.h>

#include "egonet/cli.hpp"
#include "egonet/data.hpp"
#include "egonet/dhg.hpp"
#include "egonet/error.hpp"
#include "egonet/eval.hpp"
#include "egonet/kernels.hpp"
#include "egonet/model.hpp"
#include "egonet/pipeline.hpp"

namespace py = pybind11;
using namespace egonet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

template <class Map>
Map to_map(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected an H x W array");
  Map m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    const double v = a.data()[i];
    if (std::isfinite(v) && v > 0.0) {
      m.values[i] = v;
      m.valid[i] = 1;
    }
  }
  return m;
}

// Invalid pixels come back as NaN.
template <class Map>
Array from_map(const Map& m) {
  Array out({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width)});
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    out.mutable_data()[i] = m.valid[i] ? m.values[i] : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

Image to_image(const Array& a) {
  if (a.ndim() != 3) throw ShapeError("expected a C x H x W array");
  Image img(a.shape(0), a.shape(1), a.shape(2));
  std::copy(a.data(), a.data() + a.size(), img.values.begin());
  return img;
}

Array from_image(const Image& img) {
  Array out({static_cast<py::ssize_t>(img.channels), static_cast<py::ssize_t>(img.height),
             static_cast<py::ssize_t>(img.width)});
  std::copy(img.values.begin(), img.values.end(), out.mutable_data());
  return out;
}

std::vector<Tensor> to_tensors(const std::vector<Array>& arrays) {
  std::vector<Tensor> out;
  for (const auto& a : arrays) out.push_back(to_tensor(a));
  return out;
}

dhg::StereoCalib make_calib(double focal_px, double baseline_m, double camera_height_m, double pitch_rad, double cx,
                            double cy) {
  dhg::StereoCalib c{focal_px, baseline_m, camera_height_m, pitch_rad, cx, cy};
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "EgoNet core: tensors, DHG encoding, model inference, evaluation and the synthetic generator";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "conv2d",
      [](const Array& x, const Array& w, const Array& b, int stride, int padding, int dilation) {
        return to_array(kernels::conv2d(to_tensor(x), to_tensor(w), to_tensor(b), {stride, padding, dilation}));
      },
      py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1, py::arg("padding") = 0,
      py::arg("dilation") = 1, "NCHW convolution with OIHW weights.");

  py::class_<dhg::StereoCalib>(m, "StereoCalib")
      .def(py::init(&make_calib), py::arg("focal_px") = 56.0, py::arg("baseline_m") = 0.1,
           py::arg("camera_height_m") = 1.5, py::arg("pitch_rad") = 0.0, py::arg("cx") = 0.0, py::arg("cy") = 0.0)
      .def_readwrite("focal_px", &dhg::StereoCalib::focal_px)
      .def_readwrite("baseline_m", &dhg::StereoCalib::baseline_m)
      .def_readwrite("camera_height_m", &dhg::StereoCalib::camera_height_m)
      .def_readwrite("pitch_rad", &dhg::StereoCalib::pitch_rad)
      .def_readwrite("cx", &dhg::StereoCalib::cx)
      .def_readwrite("cy", &dhg::StereoCalib::cy);

  m.def(
      "scanline_dp",
      [](const std::vector<double>& left, const std::vector<double>& right, int max_disparity,
         double occlusion_cost) {
        const auto r = dhg::scanline_dp(left, right, {max_disparity, occlusion_cost});
        return py::make_tuple(r.disparity, r.cost);
      },
      py::arg("left"), py::arg("right"), py::arg("max_disparity") = 16, py::arg("occlusion_cost") = 0.04,
      "Returns (disparity per left pixel, -1 when occluded; total cost).");
  m.def(
      "scanline_disparity",
      [](const Array& left, const Array& right, int max_disparity, double occlusion_cost) {
        return from_map(dhg::scanline_disparity(to_image(left), to_image(right), {max_disparity, occlusion_cost}));
      },
      py::arg("left"), py::arg("right"), py::arg("max_disparity") = 16, py::arg("occlusion_cost") = 0.04);
  m.def(
      "disparity_to_depth",
      [](const Array& d, const dhg::StereoCalib& c) {
        return from_map(dhg::disparity_to_depth(to_map<dhg::DisparityMap>(d), c));
      },
      py::arg("disparity"), py::arg("calib"));
  m.def(
      "depth_to_disparity",
      [](const Array& z, const dhg::StereoCalib& c) {
        return from_map(dhg::depth_to_disparity(to_map<dhg::DepthMap>(z), c));
      },
      py::arg("depth"), py::arg("calib"));
  m.def(
      "depth_to_height",
      [](const Array& z, const dhg::StereoCalib& c) {
        return from_map(dhg::depth_to_height(to_map<dhg::DepthMap>(z), c));
      },
      py::arg("depth"), py::arg("calib"));
  m.def(
      "encode_dhg",
      [](const Array& depth, const Array& rgb, const dhg::StereoCalib& c, double depth_min, double depth_max,
         double height_min, double height_max) {
        const auto z = to_map<dhg::DepthMap>(depth);
        const auto d = dhg::assemble_dhg(z, dhg::depth_to_height(z, c), dhg::to_grayscale(to_image(rgb)),
                                         {depth_min, depth_max, height_min, height_max});
        return from_image(d.channels);
      },
      py::arg("depth"), py::arg("rgb"), py::arg("calib"), py::arg("depth_min") = 0.3, py::arg("depth_max") = 8.0,
      py::arg("height_min") = -0.5, py::arg("height_max") = 2.5,
      "3 x H x W depth/height/gray channels in [0, 1].");

  m.def(
      "pr_curve",
      [](const std::vector<Array>& preds, const std::vector<Array>& masks, std::size_t thresholds, bool per_image) {
        const auto p = to_tensors(preds), g = to_tensors(masks);
        const auto c = eval::pr_curve(p, g, eval::uniform_thresholds(thresholds),
                                      per_image ? eval::Pooling::kPerImage : eval::Pooling::kDataset);
        py::dict d;
        d["thresholds"] = c.thresholds;
        d["precision"] = c.precision;
        d["recall"] = c.recall;
        d["max_f"] = eval::max_f_score(c);
        d["ap"] = eval::average_precision(c);
        return d;
      },
      py::arg("predictions"), py::arg("masks"), py::arg("thresholds") = 101, py::arg("per_image") = false);
  m.def(
      "max_f_and_ap",
      [](const std::vector<Array>& preds, const std::vector<Array>& masks) {
        const auto c = eval::pr_curve_exact(to_tensors(preds), to_tensors(masks));
        return py::make_tuple(eval::max_f_score(c), eval::average_precision(c));
      },
      py::arg("predictions"), py::arg("masks"), "MF and AP over every distinct prediction value.");

  m.def(
      "generate_dataset",
      [](const std::filesystem::path& out, const std::string& spec_json) {
        const auto spec = spec_json.empty() ? data::DatasetSpec{} : data::parse_dataset_spec(spec_json);
        return data::generate_dataset(spec, out).scene_ids();
      },
      py::arg("out"), py::arg("spec_json") = "", "Writes a synthetic dataset; returns the scene ids.");
  m.def("default_dataset_spec", [] { return data::format_dataset_spec(data::DatasetSpec{}); });
  m.def(
      "render_frame",
      [](std::uint64_t seed, std::size_t index) {
        data::SceneSpec spec;
        spec.seed = seed;
        const auto f = data::render_frame(spec, index);
        return py::make_tuple(from_image(f.rgb), from_map(f.depth), to_array(f.mask));
      },
      py::arg("seed"), py::arg("index"), "(rgb 3xHxW, depth HxW, mask HxW) for the default scene.");

  py::class_<model::EgoNet>(m, "EgoNet")
      .def(py::init([](const std::string& config_text) {
             return model::EgoNet(config_text.empty() ? model::EgoNetConfig::toy()
                                                      : model::parse_config(config_text));
           }),
           py::arg("config") = "")
      .def_property_readonly("config", [](const model::EgoNet& n) { return model::format_config(n.config()); })
      .def(
          "init_params",
          [](const model::EgoNet& n, std::uint64_t seed) {
            std::map<std::string, Array> out;
            for (const auto& [k, t] : n.init_params(seed)) out.emplace(k, to_array(t));
            return out;
          },
          py::arg("seed"))
      .def(
          "predict",
          [](const model::EgoNet& n, const Array& rgb, const Array& dhg, const std::map<std::string, Array>& params) {
            model::EgoNetParams p;
            for (const auto& [k, a] : params) p.emplace(k, to_tensor(a));
            n.check_params(p);
            return to_array(n.predict(to_tensor(rgb), to_tensor(dhg), p));
          },
          py::arg("rgb"), py::arg("dhg"), py::arg("params"), "Action-object probabilities, B x H x W.")
      .def_static(
          "load_checkpoint",
          [](const std::filesystem::path& path) {
            const auto ck = model::load_checkpoint(path);
            std::map<std::string, Array> out;
            for (const auto& [k, t] : ck.params) out.emplace(k, to_array(t));
            return out;
          },
          py::arg("path"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "egonet");
        py::gil_scoped_release release;
        return cli::run(args);
      },
      py::arg("args"), "Runs one egonet subcommand; returns its exit code.");
}
