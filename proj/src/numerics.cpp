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
#include "ebmrec/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <string>
#include <thread>

namespace ebmrec {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft1d_inplace(std::span<cdouble> a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw DimensionError("fft length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // twiddles from std::polar directly rather than by recurrence, keeps
    // roundoff at the 1e-16 level for the sizes we care about
    std::vector<cdouble> w(half);
    for (std::size_t k = 0; k < half; ++k)
      w[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * double(k) / double(len));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cdouble u = a[i + k];
        const cdouble v = a[i + k + half] * w[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

namespace {

ComplexImage fft2_impl(const ComplexImage& in, bool inverse) {
  const std::size_t h = in.height(), w = in.width();
  if (!is_power_of_two(h) || !is_power_of_two(w))
    throw DimensionError("fft2 requires power-of-two dimensions, got " + std::to_string(h) + "x" +
                         std::to_string(w));
  ComplexImage out = in;
  const double scale = 1.0 / std::sqrt(double(h * w));
  std::vector<cdouble> column(h);
  for (std::size_t c = 0; c < out.coils(); ++c) {
    auto plane = out.coil(c);
    for (std::size_t r = 0; r < h; ++r) fft1d_inplace(plane.subspan(r * w, w), inverse);
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t r = 0; r < h; ++r) column[r] = plane[r * w + x];
      fft1d_inplace(column, inverse);
      for (std::size_t r = 0; r < h; ++r) plane[r * w + x] = column[r] * scale;
    }
  }
  return out;
}

}  // namespace

ComplexImage fft2(const ComplexImage& img) { return fft2_impl(img, false); }
ComplexImage ifft2(const ComplexImage& k) { return fft2_impl(k, true); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(splitmix64(seed ^ splitmix64(stream_id))) {}

RandomStream RandomStream::split(std::uint64_t child) const {
  return RandomStream(seed_, splitmix64(stream_id_ * 0x100000001b3ULL + splitmix64(child + 1)));
}

double RandomStream::normal() { return normal_(engine_); }

double RandomStream::uniform(double lo, double hi) {
  // 53 random mantissa bits -> [0, 1)
  const double u = double(engine_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::size_t RandomStream::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("index(0) has no valid outcome");
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(engine_);
}

RealTensor gaussian(RandomStream& stream, const std::vector<std::size_t>& shape, double std) {
  if (!(std >= 0.0) || !std::isfinite(std))
    throw std::invalid_argument("gaussian std must be finite and >= 0");
  RealTensor t(shape);
  if (std == 0.0) return t;
  for (auto& v : t.values()) v = std * stream.normal();
  return t;
}

RealTensor uniform(RandomStream& stream, const std::vector<std::size_t>& shape, double lo,
                   double hi) {
  if (!(lo < hi)) throw std::invalid_argument("uniform requires lo < hi");
  RealTensor t(shape);
  for (auto& v : t.values()) v = stream.uniform(lo, hi);
  return t;
}

std::size_t thread_count() {
  if (const char* env = std::getenv("EBMREC_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return std::size_t(n);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(n, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ebmrec
