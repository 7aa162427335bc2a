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

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "ebmrec/energy_net.hpp"
#include "ebmrec/kspace.hpp"
#include "ebmrec/tensor.hpp"
#include "ebmrec/trainer.hpp"

namespace ebmrec {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File layouts (all integers and floats little-endian):
//
//   CIMG: "CIMG1", u32 height, u32 width, u32 coils, u8 dtype (1 = f64),
//         then (re, im) f64 pairs, coil-major then row-major.
//   MASK: "MASK1", u32 height, u32 width, u8 pattern, f64 R, then one u8
//         (0/1) per location, row-major, unshifted k-space layout.
//   EBMW: "EBMW1", u32 in_channels, u32 stem_width, u32 block count, then
//         per block (u32 width, u8 downsample); u32 tensor count, then per
//         tensor (u32 name length, name bytes, u32 rank, u32 dims[rank],
//         f64 values).

std::string encode_cimg(const ComplexImage& img);
ComplexImage decode_cimg(const std::string& bytes);
void save_cimg(const std::filesystem::path& path, const ComplexImage& img);
ComplexImage load_cimg(const std::filesystem::path& path);

std::string encode_mask(const SamplingMask& mask);
SamplingMask decode_mask(const std::string& bytes);
void save_mask(const std::filesystem::path& path, const SamplingMask& mask);
SamplingMask load_mask(const std::filesystem::path& path);

/// Network weights plus optional optimizer state for resuming.
struct Checkpoint {
  EnergyParams params;
  std::optional<AdamState> adam;
  std::size_t iteration = 0;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place, so readers never
/// see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace ebmrec
