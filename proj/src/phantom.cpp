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
#include "ebmrec/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ebmrec {

namespace {

struct Ellipse {
  double cx, cy, a, b, cos_t, sin_t, intensity;
  bool inside(double u, double v) const {
    const double du = u - cx, dv = v - cy;
    const double p = (du * cos_t + dv * sin_t) / a;
    const double q = (-du * sin_t + dv * cos_t) / b;
    return p * p + q * q <= 1.0;
  }
};

Ellipse random_ellipse(RandomStream& rs, double cmax, double amin, double amax, double intensity) {
  Ellipse e{};
  e.cx = rs.uniform(-cmax, cmax);
  e.cy = rs.uniform(-cmax, cmax);
  e.a = rs.uniform(amin, amax);
  e.b = rs.uniform(amin, amax);
  const double t = rs.uniform(0.0, std::numbers::pi);
  e.cos_t = std::cos(t);
  e.sin_t = std::sin(t);
  e.intensity = intensity;
  return e;
}

// Normalized coordinate of sample s (of n) along an axis of `len` pixels at
// pixel index i, in [-1, 1].
double coord(std::size_t i, std::size_t s, std::size_t n, std::size_t len) {
  return 2.0 * (double(i) + (double(s) + 0.5) / double(n)) / double(len) - 1.0;
}

std::vector<double> ellipse_magnitude(const PhantomSpec& spec, std::size_t count, RandomStream& rs) {
  std::vector<Ellipse> shapes;
  for (std::size_t k = 0; k < count; ++k) {
    const double inten = rs.uniform(spec.min_intensity, spec.max_intensity);
    // the first ellipse is a large "body", the others sit inside it
    shapes.push_back(k == 0 ? random_ellipse(rs, 0.1, 0.6, 0.85, inten)
                            : random_ellipse(rs, 0.45, 0.05, 0.35, inten));
  }
  const std::size_t h = spec.height, w = spec.width, ss = std::max<std::size_t>(1, spec.supersample);
  std::vector<double> mag(h * w, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::size_t sy = 0; sy < ss; ++sy)
        for (std::size_t sx = 0; sx < ss; ++sx) {
          const double v = coord(y, sy, ss, h), u = coord(x, sx, ss, w);
          for (const auto& e : shapes)
            if (e.inside(u, v)) acc += e.intensity;
        }
      mag[y * w + x] = acc / double(ss * ss);
    }
  return mag;
}

std::vector<double> blob_magnitude(const PhantomSpec& spec, std::size_t count, RandomStream& rs) {
  struct Blob {
    double cx, cy, s, intensity;
  };
  std::vector<Blob> blobs;
  for (std::size_t k = 0; k < count; ++k)
    blobs.push_back({rs.uniform(-0.6, 0.6), rs.uniform(-0.6, 0.6), rs.uniform(0.08, 0.3),
                     rs.uniform(spec.min_intensity, spec.max_intensity)});
  std::vector<double> mag(spec.height * spec.width, 0.0);
  for (std::size_t y = 0; y < spec.height; ++y)
    for (std::size_t x = 0; x < spec.width; ++x) {
      const double v = coord(y, 0, 1, spec.height), u = coord(x, 0, 1, spec.width);
      double acc = 0.0;
      for (const auto& b : blobs) {
        const double d2 = (u - b.cx) * (u - b.cx) + (v - b.cy) * (v - b.cy);
        acc += b.intensity * std::exp(-d2 / (2 * b.s * b.s));
      }
      mag[y * spec.width + x] = acc;
    }
  return mag;
}

}  // namespace

std::string to_string(PhantomKind k) { return k == PhantomKind::ellipses ? "ellipses" : "blobs"; }

PhantomKind parse_phantom_kind(const std::string& s) {
  if (s == "ellipses") return PhantomKind::ellipses;
  if (s == "blobs") return PhantomKind::blobs;
  throw std::invalid_argument("unknown phantom kind '" + s + "'");
}

ComplexImage make_phantom(const PhantomSpec& spec, RandomStream& rs) {
  if (spec.min_shapes > spec.max_shapes) throw std::invalid_argument("min_shapes > max_shapes");
  if (!(spec.min_intensity <= spec.max_intensity))
    throw std::invalid_argument("min_intensity > max_intensity");
  const std::size_t count = spec.min_shapes + rs.index(spec.max_shapes - spec.min_shapes + 1);
  std::vector<double> mag = spec.kind == PhantomKind::ellipses ? ellipse_magnitude(spec, count, rs)
                                                               : blob_magnitude(spec, count, rs);
  const double peak = *std::max_element(mag.begin(), mag.end());
  if (peak > 0.0)
    for (auto& m : mag) m /= peak;

  // smooth phase: a few low-frequency plane waves
  struct Wave {
    double ku, kv, offset, weight;
  };
  std::vector<Wave> waves;
  const int terms = 4;
  for (int k = 0; k < terms; ++k)
    waves.push_back({rs.uniform(-1.0, 1.0), rs.uniform(-1.0, 1.0),
                     rs.uniform(0.0, 2 * std::numbers::pi), rs.uniform(-1.0, 1.0)});
  double wsum = 0.0;
  for (const auto& wv : waves) wsum += std::abs(wv.weight);

  ComplexImage img(spec.height, spec.width, 1);
  for (std::size_t y = 0; y < spec.height; ++y)
    for (std::size_t x = 0; x < spec.width; ++x) {
      const double v = coord(y, 0, 1, spec.height), u = coord(x, 0, 1, spec.width);
      double phi = 0.0;
      for (const auto& wv : waves)
        phi += wv.weight * std::cos(std::numbers::pi * (wv.ku * u + wv.kv * v) + wv.offset);
      if (wsum > 0.0) phi *= spec.phase_amplitude / wsum;
      img(y, x) = std::polar(mag[y * spec.width + x], phi);
    }
  return img;
}

Dataset make_dataset(const PhantomSpec& spec, std::size_t count, const RandomStream& stream) {
  if (count < 2) throw std::invalid_argument("dataset needs at least 2 images");
  Dataset d;
  for (std::size_t i = 0; i < count; ++i) {
    RandomStream rs = stream.split(i);
    d.images.push_back(make_phantom(spec, rs));
  }
  const std::size_t n_test = std::max<std::size_t>(1, count / 10);
  for (std::size_t i = 0; i < count; ++i) (i < count - n_test ? d.train : d.test).push_back(i);
  return d;
}

CoilSensitivities simulate_sensitivities(std::size_t n_coils, std::size_t height,
                                         std::size_t width) {
  if (n_coils == 0) throw std::invalid_argument("need at least one coil");
  CoilSensitivities s{ComplexImage(height, width, n_coils)};
  const double lobe_radius = 0.8, lobe_width = 0.7;
  for (std::size_t c = 0; c < n_coils; ++c) {
    const double angle = 2 * std::numbers::pi * double(c) / double(n_coils);
    const double cx = n_coils > 1 ? lobe_radius * std::cos(angle) : 0.0;
    const double cy = n_coils > 1 ? lobe_radius * std::sin(angle) : 0.0;
    const double ramp = n_coils > 1 ? 0.5 : 0.0;
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double v = coord(y, 0, 1, height), u = coord(x, 0, 1, width);
        const double d2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
        const double mag = std::exp(-d2 / (2 * lobe_width * lobe_width));
        const double phase = angle + ramp * (u * std::cos(angle) + v * std::sin(angle));
        s.maps.at(c, y, x) = std::polar(mag, phase);
      }
  }
  for (std::size_t i = 0; i < height * width; ++i) {
    double ss = 0.0;
    for (std::size_t c = 0; c < n_coils; ++c) ss += std::norm(s.maps.coil(c)[i]);
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t c = 0; c < n_coils; ++c) s.maps.coil(c)[i] *= inv;
  }
  return s;
}

}  // namespace ebmrec
