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
#include <iosfwd>
#include <string>
#include <vector>

#include "ebmrec/cli/config.hpp"
#include "ebmrec/metrics.hpp"

namespace ebmrec::cli {

// Stream ids under the experiment seed, one per consumer.
inline constexpr std::uint64_t kStreamPhantoms = 1;
inline constexpr std::uint64_t kStreamMask = 2;
inline constexpr std::uint64_t kStreamTrain = 3;
inline constexpr std::uint64_t kStreamMeasure = 4;
inline constexpr std::uint64_t kStreamRecon = 5;
inline constexpr std::uint64_t kStreamSample = 6;

struct ManifestEntry {
  std::string id;
  std::filesystem::path path;
  std::string split;  // "train" or "test"
};

/// Reads "id,path,split" rows (header first). Relative paths resolve against
/// the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct MetricsRow {
  std::string image_id;
  std::string mask;
  std::string R;
  MetricsReport metrics;
};

/// "image_id,mask,R,psnr_db,ssim" with a header line.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

/// Each command writes into config.output.dir (created if missing), echoes
/// the effective config there as config.ini, reports progress on `log` and
/// throws on any failure.
void cmd_phantom(const ExperimentConfig& config, std::ostream& log);
void cmd_mask(const ExperimentConfig& config, std::ostream& log);
void cmd_train(const ExperimentConfig& config, std::ostream& log);
void cmd_recon(const ExperimentConfig& config, std::ostream& log);
void cmd_sample(const ExperimentConfig& config, std::ostream& log);

struct EvalInputs {
  std::string result;
  std::string reference;
  /// "id,result,reference" rows; when set, result/reference are ignored.
  std::string manifest;
};
void cmd_eval(const ExperimentConfig& config, const EvalInputs& inputs, std::ostream& log);

}  // namespace ebmrec::cli
