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
#include <string>
#include <utility>
#include <vector>

#include "ebmrec/tensor.hpp"

namespace ebmrec::cli {

inline constexpr double kErrorMapScale = 5.0;

/// 8-bit grayscale image plus optional tEXt chunks.
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::pair<std::string, std::string>> text;
};

/// Magnitude mapped so that `white` becomes 255; larger values clip.
GrayImage magnitude_image(const ComplexImage& img, double white);

/// |result - reference| * kErrorMapScale, with max|reference| as white.
GrayImage error_map(const ComplexImage& result, const ComplexImage& reference);

std::string encode_png(const GrayImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

}  // namespace ebmrec::cli
