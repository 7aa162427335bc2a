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
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "ebmrec/energy_net.hpp"
#include "ebmrec/numerics.hpp"

namespace ebmrec {

/// Descending noise levels with the base step and the number of Langevin
/// steps taken per level.
struct NoiseSchedule {
  std::vector<double> sigmas{0.5, 0.01};
  double base_step = 2e-5;
  std::size_t inner_steps = 20;

  /// `levels` values spaced geometrically from first down to last.
  static NoiseSchedule geometric(double first, double last, std::size_t levels, double base_step,
                                 std::size_t inner_steps);
  void validate() const;
  double last_sigma() const { return sigmas.back(); }
};

/// step_i = eps * sigma_i^2 / sigma_last^2.
double anneal_step_size(double eps, double sigma_i, double sigma_last);

struct LangevinOptions {
  /// Rescale the energy gradient to at most this l2 norm (0 disables).
  double grad_clip = 0.0;
  /// Clamp the state to [lo, hi] after each step.
  std::optional<std::pair<double, double>> clamp;
  /// Noise variance is temperature * step. 1 is the plain unadjusted
  /// Langevin update, which targets exp(-E); T targets exp(-E/T).
  double temperature = 1.0;
};

/// x - (step/2) grad E(x, sigma) + N(0, temperature * step). One gradient
/// evaluation. Throws NumericalError if the gradient is not finite.
RealTensor langevin_step(const EnergyModel& model, const RealTensor& x, double step, double sigma,
                         RandomStream& stream, const LangevinOptions& opts = {});

/// `steps` composed langevin_step calls.
RealTensor run_chain(const EnergyModel& model, const RealTensor& x0, std::size_t steps,
                     double step, double sigma, RandomStream& stream,
                     const LangevinOptions& opts = {});

/// Evaluates a wrapped model on overlapping square tiles of a (2, H, W)
/// state and averages gradients where tiles overlap. Energy is the sum of
/// tile energies.
class TiledEnergy final : public EnergyModel {
 public:
  TiledEnergy(const EnergyModel& inner, std::size_t tile = 32, std::size_t overlap = 8);
  EnergyAndGrad evaluate(const RealTensor& x, double sigma) const override;

 private:
  const EnergyModel* inner_;
  std::size_t tile_;
  std::size_t overlap_;
};

/// Bounded FIFO store of past negative samples.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000, double reuse_probability = 0.95);

  std::size_t capacity() const { return capacity_; }
  double reuse_probability() const { return reuse_probability_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<RealTensor>& entries() const { return entries_; }

  /// Appends samples, evicting the oldest beyond capacity.
  void push(std::span<const RealTensor> samples);

  /// Each sample is a uniformly chosen buffer entry with probability
  /// reuse_probability, otherwise fresh uniform noise on [-1, 1).
  std::vector<RealTensor> init_negatives(std::size_t batch_size,
                                         const std::vector<std::size_t>& shape,
                                         RandomStream& stream) const;

 private:
  std::size_t capacity_;
  double reuse_probability_;
  std::deque<RealTensor> entries_;
};

}  // namespace ebmrec
