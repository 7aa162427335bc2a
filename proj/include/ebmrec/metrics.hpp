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

#include <span>

#include "ebmrec/tensor.hpp"

namespace ebmrec {

inline constexpr double kPsnrCapDb = 99.0;

struct MetricsReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

// Both metrics compare magnitude images. Multi-coil inputs are first
// combined by root-sum-of-squares.

/// 10 log10(max|ref|^2 / MSE(|ref|, |test|)), capped at 99 dB.
double psnr(const ComplexImage& reference, const ComplexImage& test);

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03 and dynamic range L = max|ref| (1 if the reference is zero).
/// Only windows fully inside the image are averaged. Not symmetric in its
/// arguments because L comes from the reference.
double ssim(const ComplexImage& reference, const ComplexImage& test);

MetricsReport evaluate(const ComplexImage& result, const ComplexImage& reference);

double psnr_magnitudes(std::span<const double> reference, std::span<const double> test);
double ssim_magnitudes(std::span<const double> reference, std::span<const double> test,
                       std::size_t height, std::size_t width, double dynamic_range);

}  // namespace ebmrec
