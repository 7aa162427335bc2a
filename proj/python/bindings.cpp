// Copyright 2026 The ebmrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ebmrec/io.hpp"
#include "ebmrec/phantom.hpp"
#include "ebmrec/recon.hpp"
#include "ebmrec/trainer.hpp"

namespace py = pybind11;
using namespace ebmrec;

namespace {

using CArray = py::array_t<cdouble, py::array::c_style | py::array::forcecast>;
using RArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) or (coils, H, W) complex arrays <-> ComplexImage.
ComplexImage to_image(const CArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DimensionError("expected a 2-D or 3-D complex array");
  const std::size_t c = a.ndim() == 3 ? a.shape(0) : 1;
  const std::size_t h = a.shape(a.ndim() - 2), w = a.shape(a.ndim() - 1);
  ComplexImage img(h, w, c);
  std::copy(a.data(), a.data() + a.size(), img.values().begin());
  return img;
}

CArray to_array(const ComplexImage& img) {
  std::vector<py::ssize_t> shape;
  if (img.coils() > 1) shape.push_back(py::ssize_t(img.coils()));
  shape.push_back(py::ssize_t(img.height()));
  shape.push_back(py::ssize_t(img.width()));
  CArray out(shape);
  std::copy(img.values().begin(), img.values().end(), out.mutable_data());
  return out;
}

RealTensor to_tensor(const RArray& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return RealTensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

RArray to_array(const RealTensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  RArray out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::array_t<bool> mask_array(const SamplingMask& m) {
  py::array_t<bool> out({py::ssize_t(m.height), py::ssize_t(m.width)});
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < m.keep.size(); ++i) p[i] = m.keep[i] != 0;
  return out;
}

SamplingMask mask_from_array(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a,
                             MaskPattern pattern, double R) {
  if (a.ndim() != 2) throw DimensionError("mask must be 2-D");
  SamplingMask m;
  m.height = a.shape(0);
  m.width = a.shape(1);
  m.pattern = pattern;
  m.acceleration = R;
  m.keep.assign(a.data(), a.data() + a.size());
  return m;
}

std::optional<CoilSensitivities> sens_from(const std::optional<CArray>& a) {
  if (!a) return std::nullopt;
  return CoilSensitivities{to_image(*a)};
}

}  // namespace

PYBIND11_MODULE(_ebmrec, m) {
  m.doc() = "Energy-based prior MRI reconstruction (C++ core)";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("fft2", [](const CArray& x) { return to_array(fft2(to_image(x))); },
        "Unitary 2-D FFT per coil (unshifted layout).");
  m.def("ifft2", [](const CArray& k) { return to_array(ifft2(to_image(k))); });

  py::enum_<MaskPattern>(m, "MaskPattern")
      .value("cartesian1d", MaskPattern::cartesian1d)
      .value("pseudo_radial", MaskPattern::pseudo_radial)
      .value("random2d", MaskPattern::random2d)
      .value("poisson_disk", MaskPattern::poisson_disk);

  m.def(
      "make_mask",
      [](const std::string& pattern, double R, std::size_t size, std::uint64_t seed,
         double center_fraction) {
        RandomStream rs(seed);
        return mask_array(make_mask(parse_mask_pattern(pattern), R, size, size, center_fraction, rs));
      },
      py::arg("pattern"), py::arg("R"), py::arg("size"), py::arg("seed") = 0,
      py::arg("center_fraction") = kDefaultCenterFraction,
      "Boolean k-space mask in the unshifted layout.");

  m.def(
      "forward",
      [](const CArray& x, const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
         const std::optional<CArray>& sens, double noise_std, std::uint64_t seed) {
        const auto s = sens_from(sens);
        RandomStream rs(seed);
        return to_array(forward(to_image(x), mask_from_array(mask, MaskPattern::random2d, 1.0),
                                s ? &*s : nullptr, noise_std, &rs)
                            .data);
      },
      py::arg("x"), py::arg("mask"), py::arg("sens") = py::none(), py::arg("noise_std") = 0.0,
      py::arg("seed") = 0, "Undersampled k-space y = P F (S x) + n.");

  m.def(
      "zero_filled",
      [](const CArray& y, const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
         const std::optional<CArray>& sens) {
        KSpaceMeasurement meas{mask_from_array(mask, MaskPattern::random2d, 1.0), to_image(y), 0.0};
        const auto s = sens_from(sens);
        return to_array(zero_filled(meas, s ? &*s : nullptr));
      },
      py::arg("y"), py::arg("mask"), py::arg("sens") = py::none());

  m.def(
      "dc_project",
      [](const CArray& x, const CArray& y,
         const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask, double lam) {
        KSpaceMeasurement meas{mask_from_array(mask, MaskPattern::random2d, 1.0), to_image(y), 0.0};
        return to_array(dc_project_single(to_image(x), meas, lam));
      },
      py::arg("x"), py::arg("y"), py::arg("mask"), py::arg("lam"),
      "Single-coil data-consistency projection.");

  m.def("psnr", [](const CArray& ref, const CArray& x) { return psnr(to_image(ref), to_image(x)); },
        py::arg("reference"), py::arg("image"));
  m.def("ssim", [](const CArray& ref, const CArray& x) { return ssim(to_image(ref), to_image(x)); },
        py::arg("reference"), py::arg("image"));

  m.def(
      "make_phantom",
      [](std::size_t size, std::uint64_t seed, const std::string& kind) {
        PhantomSpec spec;
        spec.height = spec.width = size;
        spec.kind = parse_phantom_kind(kind);
        RandomStream rs(seed);
        return to_array(make_phantom(spec, rs));
      },
      py::arg("size") = 64, py::arg("seed") = 0, py::arg("kind") = "ellipses");

  m.def(
      "simulate_sensitivities",
      [](std::size_t coils, std::size_t size) {
        return to_array(simulate_sensitivities(coils, size, size).maps);
      },
      py::arg("coils"), py::arg("size"));

  py::class_<BlockSpec>(m, "BlockSpec")
      .def(py::init<std::size_t, bool>(), py::arg("width"), py::arg("downsample"))
      .def_readwrite("width", &BlockSpec::width)
      .def_readwrite("downsample", &BlockSpec::downsample);

  py::class_<Architecture>(m, "Architecture")
      .def(py::init<>())
      .def_readwrite("in_channels", &Architecture::in_channels)
      .def_readwrite("stem_width", &Architecture::stem_width)
      .def_readwrite("blocks", &Architecture::blocks)
      .def("validate", &Architecture::validate);

  py::class_<EnergyParams>(m, "EnergyParams")
      .def_readonly("arch", &EnergyParams::arch)
      .def_property_readonly("parameter_count", &EnergyParams::parameter_count)
      .def_readonly("names", &EnergyParams::names)
      .def("__eq__", [](const EnergyParams& a, const EnergyParams& b) { return a == b; });

  m.def(
      "init_params",
      [](const Architecture& arch, std::uint64_t seed) {
        RandomStream rs(seed);
        return init_params(arch, rs);
      },
      py::arg("arch"), py::arg("seed") = 0);

  m.def(
      "energy",
      [](const EnergyParams& p, const RArray& x, std::optional<double> sigma) {
        return energy(p, NetInput{to_tensor(x), sigma});
      },
      py::arg("params"), py::arg("x"), py::arg("sigma") = py::none(),
      "Energy of a (2, H, W) real/imag tensor.");
  m.def(
      "grad_input",
      [](const EnergyParams& p, const RArray& x, std::optional<double> sigma) {
        return to_array(grad_input(p, NetInput{to_tensor(x), sigma}));
      },
      py::arg("params"), py::arg("x"), py::arg("sigma") = py::none());

  m.def("save_checkpoint", [](const std::filesystem::path& path, const EnergyParams& p) {
    save_checkpoint(path, Checkpoint{p, std::nullopt, 0});
  });
  m.def("load_checkpoint",
        [](const std::filesystem::path& path) { return load_checkpoint(path).params; });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("arch", &TrainConfig::arch)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("noise_amplitudes", &TrainConfig::noise_amplitudes)
      .def_readwrite("langevin_steps", &TrainConfig::langevin_steps)
      .def_readwrite("langevin_step", &TrainConfig::langevin_step)
      .def_readwrite("langevin_temperature", &TrainConfig::langevin_temperature)
      .def_readwrite("buffer_capacity", &TrainConfig::buffer_capacity)
      .def_readwrite("reuse_probability", &TrainConfig::reuse_probability)
      .def_readwrite("spectral_norm", &TrainConfig::spectral_norm)
      .def_readwrite("patch", &TrainConfig::patch);

  m.def(
      "train",
      [](const std::vector<CArray>& images, const TrainConfig& config, std::uint64_t seed) {
        std::vector<RealTensor> data;
        for (const auto& a : images) data.push_back(normalize_for_training(to_image(a)));
        RandomStream rs(seed);
        py::gil_scoped_release release;
        TrainResult r = train(data, config, rs);
        std::vector<std::tuple<double, double>> log;
        for (const auto& e : r.log) log.emplace_back(e.mean_energy_pos, e.mean_energy_neg);
        return std::make_pair(std::move(r.params), std::move(log));
      },
      py::arg("images"), py::arg("config"), py::arg("seed") = 0,
      "Trains on complex images; returns (params, [(mean E+, mean E-)] per iteration).");

  py::class_<ReconConfig>(m, "ReconConfig")
      .def(py::init<>())
      .def_readwrite("lam", &ReconConfig::lambda)
      .def_readwrite("temperature", &ReconConfig::temperature)
      .def_readwrite("dc_every_step", &ReconConfig::dc_every_step)
      .def_property(
          "init", [](const ReconConfig& c) { return to_string(c.init); },
          [](ReconConfig& c, const std::string& s) { c.init = parse_init_mode(s); })
      .def_property(
          "mode", [](const ReconConfig& c) { return to_string(c.mode); },
          [](ReconConfig& c, const std::string& s) { c.mode = parse_recon_mode(s); })
      .def(
          "set_schedule",
          [](ReconConfig& c, double first, double last, std::size_t levels, double eps,
             std::size_t steps) { c.schedule = NoiseSchedule::geometric(first, last, levels, eps, steps); },
          py::arg("sigma_first"), py::arg("sigma_last"), py::arg("levels"), py::arg("eps"),
          py::arg("steps"))
      .def_property_readonly("sigmas", [](const ReconConfig& c) { return c.schedule.sigmas; });

  m.def(
      "reconstruct",
      [](const CArray& y, const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
         const EnergyParams& params, const ReconConfig& config, std::uint64_t seed,
         const std::optional<CArray>& reference, const std::optional<CArray>& sens) {
        KSpaceMeasurement meas{mask_from_array(mask, MaskPattern::random2d, 1.0), to_image(y), 0.0};
        const auto s = sens_from(sens);
        std::optional<ComplexImage> ref;
        if (reference) ref = to_image(*reference);
        RandomStream rs(seed);
        ReconReport r;
        {
          py::gil_scoped_release release;
          r = reconstruct(meas, params, config, s ? &*s : nullptr, rs, ref ? &*ref : nullptr);
        }
        return std::make_pair(to_array(r.image), r.psnr_trace);
      },
      py::arg("y"), py::arg("mask"), py::arg("params"), py::arg("config"), py::arg("seed") = 0,
      py::arg("reference") = py::none(), py::arg("sens") = py::none(),
      "Annealed Langevin reconstruction; returns (image, psnr_trace).");
}
