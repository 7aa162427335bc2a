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

#include <concepts>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ebmrec/energy_net.hpp"
#include "ebmrec/numerics.hpp"
#include "ebmrec/sampler.hpp"

namespace ebmrec {

// ---------------------------------------------------------------------------
// Contrastive maximum-likelihood gradient
//
// Per-sample loss: positives beta*E^2 + E, negatives beta*E^2 - E. The
// gradient of sample_weight * loss is dL/dE * grad_theta E, so each sample
// contributes grad_theta E scaled by contrastive_weight().

inline double contrastive_weight(double energy, double beta, bool positive,
                                 double sample_weight) {
  return sample_weight * (2.0 * beta * energy + (positive ? 1.0 : -1.0));
}

/// Energy models with parameter gradients that can be accumulated into a
/// caller-owned gradient object.
template <class M>
concept AccumulatingEnergy = requires(const M& m, const typename M::Sample& x,
                                      typename M::Gradient& g) {
  { m.energy(x) } -> std::convertible_to<double>;
  { m.zero_gradient() } -> std::same_as<typename M::Gradient>;
  m.accumulate_grad(x, 1.0, g);
};

/// sum_i w+_i dL+/dE grad E(x+_i) + sum_j w-_j dL-/dE grad E(x-_j). With
/// w+ = w- = 1/N this is the minibatch objective; with w- set to exact model
/// probabilities the negative term becomes the true model expectation.
template <AccumulatingEnergy M>
typename M::Gradient contrastive_gradient(const M& model,
                                          std::span<const typename M::Sample> positives,
                                          std::span<const double> positive_weights,
                                          std::span<const typename M::Sample> negatives,
                                          std::span<const double> negative_weights,
                                          double beta) {
  auto g = model.zero_gradient();
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const double w = contrastive_weight(model.energy(positives[i]), beta, true, positive_weights[i]);
    model.accumulate_grad(positives[i], w, g);
  }
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    const double w =
        contrastive_weight(model.energy(negatives[j]), beta, false, negative_weights[j]);
    model.accumulate_grad(negatives[j], w, g);
  }
  return g;
}

struct ContrastiveStats {
  double mean_energy_pos = 0.0;
  double mean_energy_neg = 0.0;
  double gap = 0.0;  // mean_energy_pos - mean_energy_neg
  double loss = 0.0;
};

struct ContrastiveResult {
  ParamSet grad;
  ContrastiveStats stats;
};

/// Gradient of (1/N) sum_n [beta (E(x+)^2 + E(x-)^2) + E(x+) - E(x-)].
ContrastiveResult contrastive_grad(const EnergyParams& params, std::span<const NetInput> positives,
                                   std::span<const NetInput> negatives, double beta);

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::size_t t = 0;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ParamSet& params, double learning_rate = 3e-4);
};

/// One bias-corrected Adam step in place. A non-finite gradient leaves
/// params and state untouched and returns false.
bool adam_update(AdamState& state, ParamSet& params, const ParamSet& grads);

// ---------------------------------------------------------------------------
// Training

struct PerturbedBatch {
  std::vector<RealTensor> samples;
  std::vector<double> sigmas;
};

/// Adds N(0, sigma^2) noise to each sample, sigma drawn uniformly from
/// `amplitudes` per sample.
PerturbedBatch perturb_positives(std::span<const RealTensor> batch,
                                 std::span<const double> amplitudes, RandomStream& stream);

struct TrainConfig {
  Architecture arch;
  std::size_t iterations = 500;
  std::size_t batch_size = 16;
  double beta = 1.0;
  double learning_rate = 3e-4;
  std::vector<double> noise_amplitudes{0.01, 0.05, 0.1, 0.2, 0.5};
  std::size_t langevin_steps = 10;
  double langevin_step = 1e-2;
  double langevin_grad_clip = 100.0;
  double langevin_temperature = 1.0;
  bool clamp_negatives = true;
  std::size_t buffer_capacity = 10000;
  double reuse_probability = 0.95;
  /// Renormalize every weight matrix after each optimizer step.
  bool spectral_norm = true;
  int sn_iterations = 1;
  int sn_init_iterations = 50;
  double grad_clip = 100.0;
  bool augment = true;
  /// Train on random patch x patch crops of the images; 0 uses whole images.
  std::size_t patch = 0;
  double divergence_limit = 1e6;

  void validate() const;
};

struct TrainLogEntry {
  std::size_t iter = 0;
  double mean_energy_pos = 0.0;
  double mean_energy_neg = 0.0;
  double gap = 0.0;
  double grad_norm = 0.0;
  double wallclock_s = 0.0;
};

/// Everything needed to continue training.
struct TrainState {
  EnergyParams params;
  AdamState adam;
  std::size_t iteration = 0;
  ReplayBuffer buffer;
};

TrainState make_train_state(const TrainConfig& config, RandomStream& stream);

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TrainCallback = std::function<void(const TrainLogEntry&)>;

/// Runs config.iterations more iterations on `state`. Iteration k draws all
/// its randomness from stream.split(k), so a resumed run consumes the same
/// random numbers as an uninterrupted one.
std::vector<TrainLogEntry> train_more(TrainState& state, std::span<const RealTensor> dataset,
                                      const TrainConfig& config, const RandomStream& stream,
                                      const TrainCallback& on_iteration = {});

struct TrainResult {
  EnergyParams params;
  std::vector<TrainLogEntry> log;
};

/// Fresh training run: initialize, then config.iterations iterations.
TrainResult train(std::span<const RealTensor> dataset, const TrainConfig& config,
                  RandomStream& stream, const TrainCallback& on_iteration = {});

/// Complex image -> (2, H, W) tensor scaled so the largest magnitude is 1.
RealTensor normalize_for_training(const ComplexImage& img);

/// Random flip/transpose of a (2, H, W) tensor (transposes only when square).
RealTensor augment(const RealTensor& x, RandomStream& stream);

/// Uniformly placed size x size window of a (C, H, W) tensor.
RealTensor random_crop(const RealTensor& x, std::size_t size, RandomStream& stream);

}  // namespace ebmrec
