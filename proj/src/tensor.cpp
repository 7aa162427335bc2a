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
#include "ebmrec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace ebmrec {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape));
    n *= d;
  }
  return n;
}

void require_same(const RealTensor& a, const RealTensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

void require_same(const ComplexImage& a, const ComplexImage& b) {
  if (!a.same_dims(b)) throw DimensionError("complex image dimensions differ");
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

RealTensor::RealTensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

RealTensor::RealTensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (element_count(shape_) != values_.size())
    throw DimensionError("value count does not match shape " + shape_string(shape_));
}

bool RealTensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double RealTensor::squared_norm() const {
  return std::inner_product(values_.begin(), values_.end(), values_.begin(), 0.0);
}

RealTensor& RealTensor::operator+=(const RealTensor& other) {
  require_same(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

RealTensor& RealTensor::operator-=(const RealTensor& other) {
  require_same(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

RealTensor& RealTensor::operator*=(double s) {
  for (auto& v : values_) v *= s;
  return *this;
}

RealTensor& RealTensor::axpy(double a, const RealTensor& x) {
  require_same(*this, x);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
  return *this;
}

void RealTensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

RealTensor operator+(RealTensor a, const RealTensor& b) { return a += b; }
RealTensor operator-(RealTensor a, const RealTensor& b) { return a -= b; }
RealTensor operator*(double s, RealTensor a) { return a *= s; }

ComplexImage::ComplexImage(std::size_t height, std::size_t width, std::size_t coils)
    : height_(height), width_(width), coils_(coils) {
  if (height < 4 || width < 4)
    throw DimensionError("image height and width must be >= 4, got " + std::to_string(height) +
                         "x" + std::to_string(width));
  if (coils == 0) throw DimensionError("coil count must be positive");
  values_.assign(height * width * coils, cdouble{});
}

std::span<cdouble> ComplexImage::coil(std::size_t c) {
  if (c >= coils_) throw DimensionError("coil index out of range");
  return std::span<cdouble>(values_).subspan(c * pixels(), pixels());
}

std::span<const cdouble> ComplexImage::coil(std::size_t c) const {
  if (c >= coils_) throw DimensionError("coil index out of range");
  return std::span<const cdouble>(values_).subspan(c * pixels(), pixels());
}

ComplexImage ComplexImage::coil_image(std::size_t c) const {
  ComplexImage out(height_, width_, 1);
  auto src = coil(c);
  std::copy(src.begin(), src.end(), out.values_.begin());
  return out;
}

void ComplexImage::set_coil(std::size_t c, const ComplexImage& single) {
  if (single.height_ != height_ || single.width_ != width_ || single.coils_ != 1)
    throw DimensionError("set_coil expects a single-coil image of matching size");
  auto dst = coil(c);
  std::copy(single.values_.begin(), single.values_.end(), dst.begin());
}

ComplexImage ComplexImage::stack(std::span<const ComplexImage> singles) {
  if (singles.empty()) throw DimensionError("cannot stack zero images");
  ComplexImage out(singles[0].height(), singles[0].width(), singles.size());
  for (std::size_t c = 0; c < singles.size(); ++c) out.set_coil(c, singles[c]);
  return out;
}

bool ComplexImage::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](const cdouble& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

double ComplexImage::squared_norm() const {
  double s = 0.0;
  for (const auto& v : values_) s += std::norm(v);
  return s;
}

double ComplexImage::max_magnitude() const {
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, std::abs(v));
  return m;
}

ComplexImage& ComplexImage::operator+=(const ComplexImage& o) {
  require_same(*this, o);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

ComplexImage& ComplexImage::operator-=(const ComplexImage& o) {
  require_same(*this, o);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

ComplexImage& ComplexImage::operator*=(cdouble s) {
  for (auto& v : values_) v *= s;
  return *this;
}

ComplexImage operator+(ComplexImage a, const ComplexImage& b) { return a += b; }
ComplexImage operator-(ComplexImage a, const ComplexImage& b) { return a -= b; }
ComplexImage operator*(cdouble s, ComplexImage a) { return a *= s; }

RealTensor to_channels(const ComplexImage& img, std::size_t c) {
  const std::size_t n = img.pixels();
  RealTensor t({2, img.height(), img.width()});
  auto src = img.coil(c);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = src[i].real();
    t[n + i] = src[i].imag();
  }
  return t;
}

ComplexImage from_channels(const RealTensor& t) {
  if (t.rank() != 3 || t.dim(0) != 2)
    throw DimensionError("expected a (2, H, W) tensor, got " + shape_string(t.shape()));
  ComplexImage img(t.dim(1), t.dim(2), 1);
  const std::size_t n = img.pixels();
  auto dst = img.values();
  for (std::size_t i = 0; i < n; ++i) dst[i] = {t[i], t[n + i]};
  return img;
}

std::vector<double> magnitude(const ComplexImage& img) {
  auto src = img.coil(0);
  std::vector<double> m(src.size());
  std::transform(src.begin(), src.end(), m.begin(), [](const cdouble& v) { return std::abs(v); });
  return m;
}

}  // namespace ebmrec
