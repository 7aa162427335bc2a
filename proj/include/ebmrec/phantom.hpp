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

#include <cstddef>
#include <string>
#include <vector>

#include "ebmrec/kspace.hpp"
#include "ebmrec/numerics.hpp"

namespace ebmrec {

enum class PhantomKind { ellipses, blobs };

std::string to_string(PhantomKind k);
PhantomKind parse_phantom_kind(const std::string& s);

/// Synthetic complex image generator settings. Shape counts are drawn
/// uniformly from [min_shapes, max_shapes].
struct PhantomSpec {
  PhantomKind kind = PhantomKind::ellipses;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t min_shapes = 4;
  std::size_t max_shapes = 9;
  double min_intensity = 0.1;
  double max_intensity = 1.0;
  /// Peak phase excursion in radians.
  double phase_amplitude = 1.0;
  /// Supersampling factor per axis for edge anti-aliasing.
  std::size_t supersample = 4;
};

/// Random ellipses (or Gaussian blobs) with magnitude scaled to max 1 and a
/// smooth, band-limited phase.
ComplexImage make_phantom(const PhantomSpec& spec, RandomStream& stream);

struct Dataset {
  std::vector<ComplexImage> images;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Phantom i is drawn from stream.split(i). The last max(1, count/10)
/// images form the test split.
Dataset make_dataset(const PhantomSpec& spec, std::size_t count, const RandomStream& stream);

/// Gaussian-lobe coil maps around the field of view, normalized to unit
/// sum-of-squares at every pixel.
CoilSensitivities simulate_sensitivities(std::size_t n_coils, std::size_t height,
                                         std::size_t width);

}  // namespace ebmrec
