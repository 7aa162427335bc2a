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
#include "ebmrec/recon.hpp"

#include <chrono>
#include <memory>
#include <stdexcept>

namespace ebmrec {

std::string to_string(ReconMode m) {
  switch (m) {
    case ReconMode::single_coil: return "single_coil";
    case ReconMode::parallel_sens: return "parallel_sens";
    case ReconMode::calib_free: return "calib_free";
  }
  return "unknown";
}

std::string to_string(InitMode m) {
  return m == InitMode::uniform_noise ? "uniform_noise" : "zero_filled";
}

ReconMode parse_recon_mode(const std::string& s) {
  for (auto m : {ReconMode::single_coil, ReconMode::parallel_sens, ReconMode::calib_free})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown reconstruction mode '" + s + "'");
}

InitMode parse_init_mode(const std::string& s) {
  if (s == "uniform_noise") return InitMode::uniform_noise;
  if (s == "zero_filled") return InitMode::zero_filled;
  throw std::invalid_argument("unknown init mode '" + s + "'");
}

void ReconConfig::validate() const {
  schedule.validate();
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (mode == ReconMode::parallel_sens && !(lambda > 0.0))
    throw std::invalid_argument("parallel_sens mode needs lambda > 0");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
}

ComplexImage init_state(const ReconConfig& config, const KSpaceMeasurement& y,
                        const CoilSensitivities* coils, RandomStream& stream) {
  const std::size_t h = y.data.height(), w = y.data.width();
  const std::size_t n = config.mode == ReconMode::calib_free ? y.data.coils() : 1;
  if (config.init == InitMode::zero_filled) {
    if (config.mode == ReconMode::calib_free) return zero_filled_per_coil(y);
    return zero_filled(y, config.mode == ReconMode::parallel_sens ? coils : nullptr);
  }
  ComplexImage x(h, w, n);
  for (auto& v : x.values()) {
    const double re = stream.uniform(-1.0, 1.0);
    const double im = stream.uniform(-1.0, 1.0);
    v = {re, im};
  }
  return x;
}

ReconReport reconstruct(const KSpaceMeasurement& y, const EnergyModel& prior,
                        const ReconConfig& config, const CoilSensitivities* coils,
                        RandomStream& stream, const ComplexImage* reference,
                        const ReconObserver& observer) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  switch (config.mode) {
    case ReconMode::single_coil:
      if (y.data.coils() != 1) throw DimensionError("single_coil mode needs one coil of data");
      break;
    case ReconMode::parallel_sens:
      if (!coils) throw std::invalid_argument("parallel_sens mode needs sensitivity maps");
      break;
    case ReconMode::calib_free:
      if (y.data.coils() < 2) throw DimensionError("calib_free mode needs at least 2 coils");
      break;
  }
  if (reference && (reference->height() != y.data.height() || reference->width() != y.data.width()))
    throw DimensionError("reference and measurement differ in size");

  std::unique_ptr<TiledEnergy> tiled;
  if (config.tiled) tiled = std::make_unique<TiledEnergy>(prior, config.tile, config.tile_overlap);
  const EnergyModel& model = tiled ? static_cast<const EnergyModel&>(*tiled) : prior;

  LangevinOptions lopts;
  lopts.temperature = config.temperature;

  auto project = [&](const ComplexImage& x) -> ComplexImage {
    switch (config.mode) {
      case ReconMode::single_coil: return dc_project_single(x, y, config.lambda);
      case ReconMode::parallel_sens:
        return dc_project_multicoil(x, y, *coils, config.lambda, config.cg_tol, config.cg_max_iter).x;
      case ReconMode::calib_free: return dc_project_calibfree(x, y, config.lambda);
    }
    return x;
  };
  auto combined = [&](const ComplexImage& x) {
    return config.mode == ReconMode::calib_free ? rss_combine(x) : x;
  };

  ReconReport report;
  report.config = config;
  ComplexImage x = init_state(config, y, coils, stream);
  const auto& sigmas = config.schedule.sigmas;
  const std::size_t T = config.schedule.inner_steps;
  std::size_t iteration = 0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const double step = anneal_step_size(config.schedule.base_step, sigmas[i], sigmas.back());
    for (std::size_t t = 0; t < T; ++t, ++iteration) {
      for (std::size_t c = 0; c < x.coils(); ++c) {
        RealTensor xc = to_channels(x, c);
        try {
          xc = langevin_step(model, xc, step, sigmas[i], stream, lopts);
        } catch (const NumericalError& e) {
          throw NumericalError("reconstruction iteration " + std::to_string(iteration) + ": " +
                               e.what());
        }
        x.set_coil(c, from_channels(xc));
      }
      if (config.dc_every_step || t + 1 == T) x = project(x);
      if (!x.all_finite())
        throw NumericalError("reconstruction state became non-finite at iteration " +
                             std::to_string(iteration));
      if (observer) observer(iteration, x);
      if (reference) report.psnr_trace.push_back(psnr(*reference, combined(x)));
    }
  }
  report.image = combined(x);
  report.wallclock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

ReconReport reconstruct(const KSpaceMeasurement& y, const EnergyParams& params,
                        const ReconConfig& config, const CoilSensitivities* coils,
                        RandomStream& stream, const ComplexImage* reference,
                        const ReconObserver& observer) {
  const NetEnergy model(params);
  return reconstruct(y, model, config, coils, stream, reference, observer);
}

}  // namespace ebmrec
