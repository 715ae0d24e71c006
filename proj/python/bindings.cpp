/*
 * Copyright (c) 2026 The trans2seg Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "trans2seg/cli.hpp"
#include "trans2seg/errors.hpp"
#include "trans2seg/gradcheck.hpp"
#include "trans2seg/metrics.hpp"
#include "trans2seg/model.hpp"
#include "trans2seg/training.hpp"

namespace py = pybind11;
using namespace t2s;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

TensorF tensor_from(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return TensorF(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> array_from(const TensorF& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

MaskImage mask_from(const ByteArray& a) {
  if (a.ndim() != 2) throw DimensionError("mask arrays must be 2-D (height, width)");
  MaskImage m(std::size_t(a.shape(1)), std::size_t(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), m.labels.begin());
  return m;
}

py::array_t<std::uint8_t> array_from(const MaskImage& m) {
  py::array_t<std::uint8_t> out({py::ssize_t(m.height), py::ssize_t(m.width)});
  std::copy(m.labels.begin(), m.labels.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hybrid CNN-Transformer segmentation core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());

  py::enum_<Variant>(m, "Variant")
      .value("full", Variant::full)
      .value("no_dec", Variant::no_dec)
      .value("no_enc_dec", Variant::no_enc_dec);
  py::enum_<Scale>(m, "Scale")
      .value("small", Scale::small)
      .value("medium", Scale::medium)
      .value("large", Scale::large);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("embed_dim", &ModelConfig::embed_dim)
      .def_readwrite("enc_layers", &ModelConfig::enc_layers)
      .def_readwrite("dec_layers", &ModelConfig::dec_layers)
      .def_readwrite("heads", &ModelConfig::heads)
      .def_readwrite("mlp_ratio", &ModelConfig::mlp_ratio)
      .def_readwrite("num_classes", &ModelConfig::num_classes)
      .def_readwrite("input_size", &ModelConfig::input_size)
      .def_readwrite("variant", &ModelConfig::variant)
      .def_readwrite("literal_decoder", &ModelConfig::literal_decoder)
      .def_property(
          "stage_channels", [](const ModelConfig& c) { return c.backbone.stage_channels; },
          [](ModelConfig& c, std::array<std::size_t, 4> v) { c.backbone.stage_channels = v; })
      .def_property(
          "head_hidden", [](const ModelConfig& c) { return c.head.hidden_channels; },
          [](ModelConfig& c, std::size_t v) { c.head.hidden_channels = v; })
      .def("apply_scale", &ModelConfig::apply_scale)
      .def("validate", &ModelConfig::validate)
      .def("tokens", &ModelConfig::tokens);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("adam_eps", &TrainConfig::adam_eps)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("poly_power", &TrainConfig::poly_power)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every);

  py::class_<Sample>(m, "Sample")
      .def(py::init([](const FloatArray& image, const ByteArray& mask, std::string stem) {
             return Sample{tensor_from(image), mask_from(mask), std::move(stem), ""};
           }),
           py::arg("image"), py::arg("mask"), py::arg("stem") = "")
      .def_property_readonly("image", [](const Sample& s) { return array_from(s.image); })
      .def_property_readonly("mask", [](const Sample& s) { return array_from(s.mask); })
      .def_readonly("stem", &Sample::stem);

  py::class_<SegModel<float>>(m, "Model")
      .def(py::init<ModelConfig, std::uint64_t>(), py::arg("config"), py::arg("seed") = 0)
      .def("forward",
           [](const SegModel<float>& model, const FloatArray& image) {
             return array_from(model.forward(tensor_from(image)));
           })
      .def("trace",
           [](const SegModel<float>& model, const FloatArray& image) {
             const auto t = model.trace(tensor_from(image));
             py::dict d;
             auto put = [&](const char* k, const TensorF& v) {
               if (v.defined()) d[k] = array_from(v);
             };
             put("feature", t.feature);
             put("res2", t.res2);
             put("encoded", t.encoded);
             put("attn", t.attn);
             put("logits", t.logits);
             return d;
           })
      .def("predict",
           [](const SegModel<float>& model, const FloatArray& image) {
             return array_from(model.predict(tensor_from(image)));
           })
      .def_property_readonly("param_count",
                             [](const SegModel<float>& model) { return model.params().count(); })
      .def("param_count_by_module", &SegModel<float>::param_count_by_module)
      .def("macs", [](const SegModel<float>& model) { return count_macs(model); })
      .def("save",
           [](const SegModel<float>& model, const std::string& path) {
             save_checkpoint(model.params(), path);
           })
      .def("load", [](SegModel<float>& model, const std::string& path) {
        load_checkpoint(model.params(), path);
      });

  m.def("synth_dataset", &synth_dataset, py::arg("seed"), py::arg("count"), py::arg("size") = 64,
        py::arg("num_classes") = 12);

  m.def(
      "train",
      [](SegModel<float>& model, const std::vector<Sample>& train_set,
         const std::vector<Sample>& val_set, const TrainConfig& cfg) {
        std::vector<EpochLog> logs;
        {
          py::gil_scoped_release release;
          logs = train(model, train_set, val_set, cfg);
        }
        std::vector<py::tuple> out;
        for (const auto& e : logs) out.push_back(py::make_tuple(e.epoch, e.lr, e.mean_loss, e.val_miou));
        return out;
      },
      py::arg("model"), py::arg("train_set"), py::arg("val_set"), py::arg("config"));

  m.def(
      "confusion_matrix",
      [](const ByteArray& pred, const ByteArray& truth, std::size_t num_classes) {
        ConfusionMatrix cm(num_classes);
        accumulate(cm, mask_from(pred), mask_from(truth));
        py::array_t<std::uint64_t> out({py::ssize_t(num_classes), py::ssize_t(num_classes)});
        auto* p = out.mutable_data();
        for (std::size_t t = 0; t < num_classes; ++t) {
          for (std::size_t q = 0; q < num_classes; ++q) p[t * num_classes + q] = cm.at(t, q);
        }
        return out;
      },
      py::arg("pred"), py::arg("truth"), py::arg("num_classes"));

  m.def(
      "segmentation_scores",
      [](const ByteArray& pred, const ByteArray& truth, std::size_t num_classes) {
        ConfusionMatrix cm(num_classes);
        accumulate(cm, mask_from(pred), mask_from(truth));
        const auto r = iou_per_class(cm);
        py::dict d;
        d["accuracy"] = pixel_accuracy(cm);
        d["miou"] = r.miou;
        std::vector<std::optional<double>> iou;
        for (std::size_t c = 0; c < num_classes; ++c) {
          iou.push_back(r.included[c] ? std::optional<double>(r.iou[c]) : std::nullopt);
        }
        d["iou"] = iou;
        return d;
      },
      py::arg("pred"), py::arg("truth"), py::arg("num_classes"));

  m.def(
      "count_components",
      [](const ByteArray& mask, std::uint8_t cls) { return count_components(mask_from(mask), cls); });
  m.def("cmcc", [](const std::vector<ByteArray>& masks, std::uint8_t cls) {
    std::vector<MaskImage> ms;
    for (const auto& a : masks) ms.push_back(mask_from(a));
    return cmcc(ms, cls);
  });
  m.def("pixel_ratio", [](const std::vector<ByteArray>& masks, std::uint8_t cls) {
    std::vector<MaskImage> ms;
    for (const auto& a : masks) ms.push_back(mask_from(a));
    return pixel_ratio(ms, cls);
  });

  m.def("poly_lr", &poly_lr, py::arg("base_lr"), py::arg("iter"), py::arg("max_iter"),
        py::arg("power") = 0.9);

  m.def("gradcheck", [](double tolerance) {
    std::vector<py::tuple> out;
    for (const auto& r : run_gradcheck_suite(tolerance)) {
      out.push_back(py::make_tuple(r.name, r.max_rel_error, r.passed));
    }
    return out;
  }, py::arg("tolerance") = 1e-4);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
