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
#include "ebmrec/cli/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ebmrec/io.hpp"
#include "ebmrec/kspace.hpp"

namespace ebmrec::cli {

namespace {

std::vector<double> magnitudes(const ComplexImage& img) {
  const ComplexImage c = img.coils() > 1 ? rss_combine(img) : img;
  std::vector<double> m;
  m.reserve(c.values().size());
  for (const auto& v : c.values()) m.push_back(std::abs(v));
  return m;
}

std::uint8_t to_byte(double v, double white) {
  if (!(white > 0.0)) return 0;
  return std::uint8_t(std::lround(std::clamp(v / white, 0.0, 1.0) * 255.0));
}

void append_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

void flush_nothing(png_structp) {}

[[noreturn]] void on_error(png_structp, png_const_charp msg) {
  throw std::runtime_error(std::string("png: ") + msg);
}

void on_warning(png_structp, png_const_charp) {}

}  // namespace

GrayImage magnitude_image(const ComplexImage& img, double white) {
  GrayImage g{img.height(), img.width(), {}, {}};
  for (double m : magnitudes(img)) g.pixels.push_back(to_byte(m, white));
  return g;
}

GrayImage error_map(const ComplexImage& result, const ComplexImage& reference) {
  if (result.height() != reference.height() || result.width() != reference.width())
    throw DimensionError("error map: result and reference differ in size");
  const auto a = magnitudes(result), b = magnitudes(reference);
  const double white = *std::max_element(b.begin(), b.end());
  GrayImage g{result.height(), result.width(), {}, {}};
  for (std::size_t i = 0; i < a.size(); ++i)
    g.pixels.push_back(to_byte(std::abs(a[i] - b[i]) * kErrorMapScale, white));
  g.text.emplace_back("error_scale", "5");
  return g;
}

std::string encode_png(const GrayImage& img) {
  if (img.pixels.size() != img.height * img.width || img.height == 0)
    throw std::invalid_argument("png: pixel buffer does not match dimensions");
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
  if (!png) throw std::runtime_error("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: cannot create info");
  }
  try {
    png_set_write_fn(png, &out, append_bytes, flush_nothing);
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_text> chunks(img.text.size());
    for (std::size_t i = 0; i < img.text.size(); ++i) {
      chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
      chunks[i].key = const_cast<char*>(img.text[i].first.c_str());
      chunks[i].text = const_cast<char*>(img.text[i].second.c_str());
    }
    if (!chunks.empty()) png_set_text(png, info, chunks.data(), int(chunks.size()));
    png_write_info(png, info);
    for (std::size_t r = 0; r < img.height; ++r)
      png_write_row(png, const_cast<png_bytep>(img.pixels.data() + r * img.width));
    png_write_end(png, info);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  write_file_atomic(path, encode_png(img));
}

}  // namespace ebmrec::cli
