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

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ebmrec/kspace.hpp"
#include "ebmrec/phantom.hpp"
#include "ebmrec/recon.hpp"
#include "ebmrec/trainer.hpp"

namespace ebmrec::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSection {
  PhantomSpec phantom;
  std::size_t count = 200;
  std::size_t coils = 1;
  double noise_std = 0.0;
  /// Phantom manifest to train on; empty means generate from the seed.
  std::string manifest;
};

struct ModelSection {
  std::size_t stem_width = 64;
  std::vector<std::size_t> widths{64, 128, 256};
  std::vector<bool> downsample{false, true, true};
  bool conditional = true;
};

struct SampleSection {
  std::size_t levels = 10;
  double sigma_first = 0.5;
  double sigma_last = 0.01;
  double eps = 2e-5;
  std::size_t steps = 20;
  double temperature = 1.0;
  std::size_t count = 4;
};

struct ReconSection {
  ReconMode mode = ReconMode::single_coil;
  double lambda = 0.1;
  InitMode init = InitMode::uniform_noise;
  bool dc_every_step = true;
  bool tiled = false;
  std::size_t tile = 32;
  std::size_t tile_overlap = 8;
  double cg_tol = 1e-8;
  std::size_t cg_max_iter = 200;
  MaskPattern pattern = MaskPattern::pseudo_radial;
  double R = 3.0;
  double center_fraction = kDefaultCenterFraction;
  std::string checkpoint;
  std::string kspace;
  std::string mask;
  std::string reference;
};

struct OutputSection {
  std::string dir = "out";
  bool png = true;
  bool wallclock = true;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataSection data;
  ModelSection model;
  /// Training hyperparameters; the arch field is ignored in favor of model.
  TrainConfig train;
  std::string resume;
  SampleSection sample;
  ReconSection recon;
  OutputSection output;

  Architecture architecture() const;
  TrainConfig train_config() const;
  PhantomSpec phantom_spec() const { return data.phantom; }
  /// Schedule and recon settings combined into the library's ReconConfig.
  ReconConfig recon_config() const;
  NoiseSchedule schedule() const;
  void validate() const;
};

/// Parses an INI file. Top-level `seed` plus sections data, model, train,
/// sample, recon, output. Unknown sections or keys are errors.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

/// Sets one value addressed as "section.key" (or "seed").
void set_value(ExperimentConfig& config, const std::string& dotted_key, const std::string& value);

/// Every key with its current value, in INI form.
std::string to_ini(const ExperimentConfig& config);

/// All accepted "section.key" names in file order.
std::vector<std::string> known_keys();

}  // namespace ebmrec::cli
