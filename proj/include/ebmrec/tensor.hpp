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

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebmrec {

using cdouble = std::complex<double>;

/// Raised when operand shapes are incompatible with an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a NaN/Inf shows up in a state that must stay finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of doubles.
class RealTensor {
 public:
  RealTensor() = default;
  explicit RealTensor(std::vector<std::size_t> shape, double fill = 0.0);
  RealTensor(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool all_finite() const;
  double squared_norm() const;
  bool same_shape(const RealTensor& other) const { return shape_ == other.shape_; }

  RealTensor& operator+=(const RealTensor& other);
  RealTensor& operator-=(const RealTensor& other);
  RealTensor& operator*=(double s);
  /// this += a * x
  RealTensor& axpy(double a, const RealTensor& x);
  void fill(double v);

  bool operator==(const RealTensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

RealTensor operator+(RealTensor a, const RealTensor& b);
RealTensor operator-(RealTensor a, const RealTensor& b);
RealTensor operator*(double s, RealTensor a);

std::string shape_string(const std::vector<std::size_t>& shape);

/// H x W complex image, optionally with several coil channels stored
/// coil-major, then row-major.
class ComplexImage {
 public:
  ComplexImage() = default;
  ComplexImage(std::size_t height, std::size_t width, std::size_t coils = 1);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t coils() const { return coils_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t size() const { return values_.size(); }

  cdouble& at(std::size_t coil, std::size_t row, std::size_t col) {
    return values_[(coil * height_ + row) * width_ + col];
  }
  const cdouble& at(std::size_t coil, std::size_t row, std::size_t col) const {
    return values_[(coil * height_ + row) * width_ + col];
  }
  cdouble& operator()(std::size_t row, std::size_t col) { return at(0, row, col); }
  const cdouble& operator()(std::size_t row, std::size_t col) const { return at(0, row, col); }

  std::span<cdouble> values() { return values_; }
  std::span<const cdouble> values() const { return values_; }
  std::span<cdouble> coil(std::size_t c);
  std::span<const cdouble> coil(std::size_t c) const;

  /// Copies one coil channel out as a single-coil image.
  ComplexImage coil_image(std::size_t c) const;
  void set_coil(std::size_t c, const ComplexImage& single);
  static ComplexImage stack(std::span<const ComplexImage> singles);

  bool same_dims(const ComplexImage& o) const {
    return height_ == o.height_ && width_ == o.width_ && coils_ == o.coils_;
  }
  bool all_finite() const;
  double squared_norm() const;
  double max_magnitude() const;

  ComplexImage& operator+=(const ComplexImage& o);
  ComplexImage& operator-=(const ComplexImage& o);
  ComplexImage& operator*=(cdouble s);

  bool operator==(const ComplexImage& o) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t coils_ = 0;
  std::vector<cdouble> values_;
};

ComplexImage operator+(ComplexImage a, const ComplexImage& b);
ComplexImage operator-(ComplexImage a, const ComplexImage& b);
ComplexImage operator*(cdouble s, ComplexImage a);

/// Real/imaginary split of coil `c` into a (2, H, W) tensor.
RealTensor to_channels(const ComplexImage& img, std::size_t c = 0);
/// Inverse of to_channels; expects shape (2, H, W).
ComplexImage from_channels(const RealTensor& t);

/// Pixelwise magnitude of coil 0, row-major.
std::vector<double> magnitude(const ComplexImage& img);

}  // namespace ebmrec
