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
#include "ebmrec/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ebmrec {

NoiseSchedule NoiseSchedule::geometric(double first, double last, std::size_t levels,
                                       double base_step, std::size_t inner_steps) {
  if (levels == 0) throw std::invalid_argument("schedule needs at least one level");
  NoiseSchedule s;
  s.base_step = base_step;
  s.inner_steps = inner_steps;
  s.sigmas.resize(levels);
  if (levels == 1) {
    s.sigmas[0] = last;
  } else {
    const double ratio = std::pow(last / first, 1.0 / double(levels - 1));
    for (std::size_t i = 0; i < levels; ++i) s.sigmas[i] = first * std::pow(ratio, double(i));
    s.sigmas.back() = last;
  }
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (sigmas.empty()) throw std::invalid_argument("noise schedule is empty");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > 0.0) || !std::isfinite(sigmas[i]))
      throw std::invalid_argument("noise levels must be positive and finite");
    if (i > 0 && !(sigmas[i] < sigmas[i - 1]))
      throw std::invalid_argument("noise levels must be strictly decreasing");
  }
  if (!(base_step > 0.0)) throw std::invalid_argument("base step must be positive");
  if (inner_steps == 0) throw std::invalid_argument("inner step count must be positive");
}

double anneal_step_size(double eps, double sigma_i, double sigma_last) {
  if (!(eps > 0.0 && sigma_i > 0.0 && sigma_last > 0.0))
    throw std::invalid_argument("step size and noise levels must be positive");
  return eps * (sigma_i * sigma_i) / (sigma_last * sigma_last);
}

RealTensor langevin_step(const EnergyModel& model, const RealTensor& x, double step, double sigma,
                         RandomStream& stream, const LangevinOptions& opts) {
  if (!(step > 0.0)) throw std::invalid_argument("Langevin step must be positive");
  if (!x.all_finite()) throw NumericalError("Langevin state contains non-finite values");
  RealTensor grad = model.grad_input(x, sigma);
  if (!grad.all_finite())
    throw NumericalError("energy gradient is not finite (sigma=" + std::to_string(sigma) +
                         ", step=" + std::to_string(step) + ")");
  if (opts.grad_clip > 0.0) {
    const double n = std::sqrt(grad.squared_norm());
    if (n > opts.grad_clip) grad *= opts.grad_clip / n;
  }
  RealTensor out = x;
  out.axpy(-0.5 * step, grad);
  const double noise_std = std::sqrt(opts.temperature * step);
  for (auto& v : out.values()) v += noise_std * stream.normal();
  if (opts.clamp)
    for (auto& v : out.values()) v = std::clamp(v, opts.clamp->first, opts.clamp->second);
  return out;
}

RealTensor run_chain(const EnergyModel& model, const RealTensor& x0, std::size_t steps,
                     double step, double sigma, RandomStream& stream,
                     const LangevinOptions& opts) {
  if (steps == 0) throw std::invalid_argument("run_chain needs at least one step");
  RealTensor x = x0;
  for (std::size_t t = 0; t < steps; ++t) x = langevin_step(model, x, step, sigma, stream, opts);
  return x;
}

TiledEnergy::TiledEnergy(const EnergyModel& inner, std::size_t tile, std::size_t overlap)
    : inner_(&inner), tile_(tile), overlap_(overlap) {
  if (tile == 0 || overlap >= tile) throw std::invalid_argument("tile must exceed overlap");
}

namespace {

std::vector<std::size_t> tile_starts(std::size_t n, std::size_t tile, std::size_t stride) {
  if (n <= tile) return {0};
  std::vector<std::size_t> s;
  for (std::size_t p = 0; p + tile < n; p += stride) s.push_back(p);
  s.push_back(n - tile);
  return s;
}

}  // namespace

EnergyAndGrad TiledEnergy::evaluate(const RealTensor& x, double sigma) const {
  if (x.rank() != 3 || x.dim(0) != 2) throw DimensionError("tiled energy expects (2, H, W)");
  const std::size_t h = x.dim(1), w = x.dim(2);
  const std::size_t th = std::min(tile_, h), tw = std::min(tile_, w);
  const std::size_t stride = tile_ - overlap_;
  EnergyAndGrad out{0.0, RealTensor({2, h, w})};
  std::vector<double> count(h * w, 0.0);
  for (auto y0 : tile_starts(h, th, stride)) {
    for (auto x0 : tile_starts(w, tw, stride)) {
      RealTensor patch({2, th, tw});
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t y = 0; y < th; ++y)
          for (std::size_t xx = 0; xx < tw; ++xx)
            patch[(c * th + y) * tw + xx] = x[(c * h + y0 + y) * w + x0 + xx];
      const EnergyAndGrad r = inner_->evaluate(patch, sigma);
      out.energy += r.energy;
      for (std::size_t y = 0; y < th; ++y)
        for (std::size_t xx = 0; xx < tw; ++xx) {
          count[(y0 + y) * w + x0 + xx] += 1.0;
          for (std::size_t c = 0; c < 2; ++c)
            out.grad[(c * h + y0 + y) * w + x0 + xx] += r.grad[(c * th + y) * tw + xx];
        }
    }
  }
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < h * w; ++i) out.grad[c * h * w + i] /= count[i];
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, double reuse_probability)
    : capacity_(capacity), reuse_probability_(reuse_probability) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  if (!(reuse_probability >= 0.0 && reuse_probability <= 1.0))
    throw std::invalid_argument("reuse probability must lie in [0, 1]");
}

void ReplayBuffer::push(std::span<const RealTensor> samples) {
  for (const auto& s : samples) {
    if (!entries_.empty() && !entries_.front().same_shape(s))
      throw DimensionError("replay buffer samples must share one shape");
    entries_.push_back(s);
    if (entries_.size() > capacity_) entries_.pop_front();
  }
}

std::vector<RealTensor> ReplayBuffer::init_negatives(std::size_t batch_size,
                                                     const std::vector<std::size_t>& shape,
                                                     RandomStream& stream) const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  std::vector<RealTensor> out;
  out.reserve(batch_size);
  for (std::size_t n = 0; n < batch_size; ++n) {
    const double u = stream.uniform(0.0, 1.0);
    if (!entries_.empty() && u < reuse_probability_) {
      const RealTensor& e = entries_[stream.index(entries_.size())];
      if (e.shape() != shape) throw DimensionError("buffer entry shape differs from request");
      out.push_back(e);
    } else {
      out.push_back(uniform(stream, shape, -1.0, 1.0));
    }
  }
  return out;
}

}  // namespace ebmrec
