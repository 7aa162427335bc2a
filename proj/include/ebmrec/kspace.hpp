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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ebmrec/numerics.hpp"
#include "ebmrec/tensor.hpp"

namespace ebmrec {

enum class MaskPattern : std::uint8_t {
  cartesian1d = 0,
  pseudo_radial = 1,
  random2d = 2,
  poisson_disk = 3,
};

std::string to_string(MaskPattern p);
MaskPattern parse_mask_pattern(const std::string& s);

/// Boolean keep-pattern on the k-space grid. Stored in the same (unshifted)
/// layout fft2 produces: DC at (0, 0), frequency of index i is i for
/// i < n/2 and i - n otherwise.
struct SamplingMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> keep;  // row-major, 0/1
  MaskPattern pattern = MaskPattern::cartesian1d;
  double acceleration = 1.0;

  bool kept(std::size_t row, std::size_t col) const { return keep[row * width + col] != 0; }
  std::size_t kept_count() const;
  double kept_fraction() const;
  bool operator==(const SamplingMask&) const = default;
};

/// Default fully-sampled center fraction.
inline constexpr double kDefaultCenterFraction = 0.08;

/// Builds a mask of the requested family with a fully-sampled center:
/// center_fraction of the rows for cartesian1d, a central disk of
/// center_fraction * H * W pixels otherwise. R = 1 gives an all-true mask.
SamplingMask make_mask(MaskPattern pattern, double R, std::size_t height, std::size_t width,
                       double center_fraction, RandomStream& stream);

/// Per-coil complex sensitivity maps; sum_c |S_c|^2 = 1 on the support.
struct CoilSensitivities {
  ComplexImage maps;  // coils() = number of coils
  std::size_t count() const { return maps.coils(); }
};

struct KSpaceMeasurement {
  SamplingMask mask;
  ComplexImage data;  // full grid, zero where the mask is false
  double noise_std = 0.0;
};

/// y_c = P F (S_c x) + n, with circular complex noise of total std noise_std
/// on kept locations. x must be single-coil.
KSpaceMeasurement forward(const ComplexImage& x, const SamplingMask& mask,
                          const CoilSensitivities* coils, double noise_std,
                          RandomStream* stream = nullptr);

/// Zero-filled baseline. Single coil: ifft2(y). With sensitivities:
/// sum_c conj(S_c) ifft2(y_c). Multi-coil without sensitivities:
/// root-sum-of-squares magnitude with the phase of the first coil.
ComplexImage zero_filled(const KSpaceMeasurement& y, const CoilSensitivities* coils = nullptr);

/// Per-coil ifft2(y_c), no combination.
ComplexImage zero_filled_per_coil(const KSpaceMeasurement& y);

/// Root-sum-of-squares magnitude, phase taken from coil 0.
ComplexImage rss_combine(const ComplexImage& per_coil);

/// Closed-form minimizer of ||P F x - y||^2 + lambda ||x - x_tilde||^2:
/// measured coefficients become (y + lambda F x_tilde) / (1 + lambda), the
/// rest keep F x_tilde. lambda = 0 is hard data consistency.
ComplexImage dc_project_single(const ComplexImage& x_tilde, const KSpaceMeasurement& y,
                               double lambda);

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct CgResult {
  ComplexImage x;
  double relative_residual = 0.0;
  std::size_t iterations = 0;
};

/// Solves (E^H E + lambda I) x = E^H y + lambda x_tilde, E = P F S, by
/// conjugate gradients started at x_tilde. Throws ConvergenceError if the
/// relative residual is still above tol after max_iter iterations.
CgResult dc_project_multicoil(const ComplexImage& x_tilde, const KSpaceMeasurement& y,
                              const CoilSensitivities& coils, double lambda, double tol = 1e-10,
                              std::size_t max_iter = 500);

/// dc_project_single applied independently to each coil channel.
ComplexImage dc_project_calibfree(const ComplexImage& x_tilde_per_coil,
                                  const KSpaceMeasurement& y, double lambda);

/// E^H E x for the multi-coil operator (exposed for tests and diagnostics).
ComplexImage normal_operator(const ComplexImage& x, const SamplingMask& mask,
                             const CoilSensitivities& coils);

}  // namespace ebmrec
