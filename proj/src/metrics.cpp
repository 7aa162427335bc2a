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
#include "ebmrec/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ebmrec/kspace.hpp"

namespace ebmrec {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;

std::array<double, kWindow * kWindow> gaussian_window() {
  std::array<double, kWindow * kWindow> w{};
  double sum = 0.0;
  for (int y = 0; y < kWindow; ++y)
    for (int x = 0; x < kWindow; ++x) {
      const double dy = y - kWindow / 2, dx = x - kWindow / 2;
      w[std::size_t(y * kWindow + x)] = std::exp(-(dx * dx + dy * dy) / (2 * kWindowSigma * kWindowSigma));
      sum += w[std::size_t(y * kWindow + x)];
    }
  for (auto& v : w) v /= sum;
  return w;
}

std::vector<double> combined_magnitude(const ComplexImage& img) {
  return magnitude(img.coils() > 1 ? rss_combine(img) : img);
}

void require_same_grid(const ComplexImage& a, const ComplexImage& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw DimensionError("metric inputs differ in size");
}

}  // namespace

double psnr_magnitudes(std::span<const double> ref, std::span<const double> test) {
  if (ref.size() != test.size()) throw DimensionError("metric inputs differ in size");
  double peak = 0.0, se = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    peak = std::max(peak, ref[i]);
    const double d = ref[i] - test[i];
    se += d * d;
  }
  if (se == 0.0) return kPsnrCapDb;
  const double mse = se / double(ref.size());
  if (peak == 0.0) return -std::numeric_limits<double>::infinity();
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double ssim_magnitudes(std::span<const double> ref, std::span<const double> test,
                       std::size_t height, std::size_t width, double L) {
  if (ref.size() != test.size() || ref.size() != height * width)
    throw DimensionError("metric inputs differ in size");
  if (height < std::size_t(kWindow) || width < std::size_t(kWindow))
    throw DimensionError("ssim needs images of at least 11x11");
  static const auto win = gaussian_window();
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + kWindow <= height; ++y0)
    for (std::size_t x0 = 0; x0 + kWindow <= width; ++x0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int y = 0; y < kWindow; ++y)
        for (int x = 0; x < kWindow; ++x) {
          const double g = win[std::size_t(y * kWindow + x)];
          const double a = ref[(y0 + std::size_t(y)) * width + x0 + std::size_t(x)];
          const double b = test[(y0 + std::size_t(y)) * width + x0 + std::size_t(x)];
          mx += g * a;
          my += g * b;
          sxx += g * a * a;
          syy += g * b * b;
          sxy += g * a * b;
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / double(count);
}

double psnr(const ComplexImage& reference, const ComplexImage& test) {
  require_same_grid(reference, test);
  return psnr_magnitudes(combined_magnitude(reference), combined_magnitude(test));
}

double ssim(const ComplexImage& reference, const ComplexImage& test) {
  require_same_grid(reference, test);
  const auto r = combined_magnitude(reference);
  const auto t = combined_magnitude(test);
  double L = *std::max_element(r.begin(), r.end());
  if (L == 0.0) L = 1.0;
  return ssim_magnitudes(r, t, reference.height(), reference.width(), L);
}

MetricsReport evaluate(const ComplexImage& result, const ComplexImage& reference) {
  return {psnr(reference, result), ssim(reference, result)};
}

}  // namespace ebmrec
