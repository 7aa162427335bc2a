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
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ebmrec/energy_net.hpp"
#include "ebmrec/kspace.hpp"
#include "ebmrec/metrics.hpp"
#include "ebmrec/sampler.hpp"

namespace ebmrec {

enum class ReconMode { single_coil, parallel_sens, calib_free };
enum class InitMode { uniform_noise, zero_filled };

std::string to_string(ReconMode m);
std::string to_string(InitMode m);
ReconMode parse_recon_mode(const std::string& s);
InitMode parse_init_mode(const std::string& s);

struct ReconConfig {
  ReconMode mode = ReconMode::single_coil;
  /// Weight of the proximity term in the data-consistency solve.
  double lambda = 0.1;
  NoiseSchedule schedule = NoiseSchedule::geometric(0.5, 0.01, 10, 2e-5, 20);
  InitMode init = InitMode::uniform_noise;
  /// Project after every Langevin step (true) or once per noise level.
  bool dc_every_step = true;
  /// Noise variance multiplier of the Langevin update (1 = plain update).
  double temperature = 1.0;
  bool tiled = false;
  std::size_t tile = 32;
  std::size_t tile_overlap = 8;
  double cg_tol = 1e-8;
  std::size_t cg_max_iter = 200;

  void validate() const;
};

struct ReconReport {
  ComplexImage image;
  /// PSNR after every inner step; empty without a reference.
  std::vector<double> psnr_trace;
  double wallclock_s = 0.0;
  ReconConfig config;
};

/// Called after every inner step with the global iteration index and the
/// post-projection state (per-coil in calibration-free mode).
using ReconObserver = std::function<void(std::size_t, const ComplexImage&)>;

/// Starting state: uniform noise on [-1, 1] per real/imag channel, or the
/// zero-filled image. Calibration-free mode starts from per-coil images.
ComplexImage init_state(const ReconConfig& config, const KSpaceMeasurement& y,
                        const CoilSensitivities* coils, RandomStream& stream);

/// Annealed Langevin prior steps alternating with data-consistency
/// projections. For level i the step is anneal_step_size(eps, sigma_i,
/// sigma_last); each of the T inner steps is a Langevin update followed by
/// the mode's projection. Calibration-free results are combined by
/// root-sum-of-squares. Throws NumericalError on a non-finite state and
/// ConvergenceError when the multi-coil solve fails.
ReconReport reconstruct(const KSpaceMeasurement& y, const EnergyModel& prior,
                        const ReconConfig& config, const CoilSensitivities* coils,
                        RandomStream& stream, const ComplexImage* reference = nullptr,
                        const ReconObserver& observer = {});

ReconReport reconstruct(const KSpaceMeasurement& y, const EnergyParams& params,
                        const ReconConfig& config, const CoilSensitivities* coils,
                        RandomStream& stream, const ComplexImage* reference = nullptr,
                        const ReconObserver& observer = {});

}  // namespace ebmrec
