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
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ebmrec/tensor.hpp"

namespace ebmrec {

// ---------------------------------------------------------------------------
// FFT

bool is_power_of_two(std::size_t n);

/// Unitary 2D DFT applied to every coil (scale 1/sqrt(HW)), so that the
/// adjoint is the inverse. Height and width must be powers of two.
ComplexImage fft2(const ComplexImage& img);
/// Exact inverse (and adjoint) of fft2.
ComplexImage ifft2(const ComplexImage& k);

/// In-place unnormalized radix-2 transform of a contiguous sequence.
/// `inverse` flips the sign of the exponent.
void fft1d_inplace(std::span<cdouble> data, bool inverse);

// ---------------------------------------------------------------------------
// Random streams

/// Reproducible random source identified by (seed, stream id). Child streams
/// obtained via split() are independent of the parent's draw position, so a
/// given (seed, path of split ids) always yields the same sequence.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  RandomStream split(std::uint64_t child) const;

  double normal();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  std::uint64_t bits() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

/// i.i.d. N(0, std^2) draws. Negative std is rejected.
RealTensor gaussian(RandomStream& stream, const std::vector<std::size_t>& shape, double std);
/// i.i.d. draws on [lo, hi). Requires lo < hi.
RealTensor uniform(RandomStream& stream, const std::vector<std::size_t>& shape, double lo,
                   double hi);

// ---------------------------------------------------------------------------
// Parallelism

/// Worker count: EBMREC_THREADS if set (>= 1), otherwise the hardware count.
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks, one per
/// worker; callers must write results into per-index slots so the outcome does
/// not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ebmrec
