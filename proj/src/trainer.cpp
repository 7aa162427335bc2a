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
#include "ebmrec/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

namespace ebmrec {

ContrastiveResult contrastive_grad(const EnergyParams& params, std::span<const NetInput> positives,
                                   std::span<const NetInput> negatives, double beta) {
  if (positives.empty() || positives.size() != negatives.size())
    throw std::invalid_argument("contrastive_grad needs equal, nonempty positive/negative batches");
  const std::size_t n = positives.size();
  const double inv_n = 1.0 / double(n);

  // Each half is reduced on its own and the halves are added at the end, so
  // identical positive and negative batches cancel exactly.
  std::vector<double> epos, eneg;
  ContrastiveResult res;
  res.grad = grad_params_weighted(
      params, positives,
      [&](std::size_t, double e) { return contrastive_weight(e, beta, true, inv_n); }, &epos);
  res.grad.axpy(1.0, grad_params_weighted(
                         params, negatives,
                         [&](std::size_t, double e) { return contrastive_weight(e, beta, false, inv_n); },
                         &eneg));
  std::vector<double> energies(epos);
  energies.insert(energies.end(), eneg.begin(), eneg.end());
  double pos = 0.0, neg = 0.0, loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pos += energies[i];
    neg += energies[n + i];
    loss += beta * (energies[i] * energies[i] + energies[n + i] * energies[n + i]) + energies[i] -
            energies[n + i];
  }
  res.stats.mean_energy_pos = pos * inv_n;
  res.stats.mean_energy_neg = neg * inv_n;
  res.stats.gap = res.stats.mean_energy_pos - res.stats.mean_energy_neg;
  res.stats.loss = loss * inv_n;
  return res;
}

AdamState AdamState::for_params(const ParamSet& params, double learning_rate) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.learning_rate = learning_rate;
  return s;
}

bool adam_update(AdamState& state, ParamSet& params, const ParamSet& grads) {
  if (grads.tensors.size() != params.tensors.size() || state.m.tensors.size() != params.tensors.size())
    throw DimensionError("adam_update: parameter, gradient and state layouts differ");
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    if (!grads.tensors[i].same_shape(params.tensors[i]) ||
        !state.m.tensors[i].same_shape(params.tensors[i]))
      throw DimensionError("adam_update: tensor shape mismatch at index " + std::to_string(i));
  if (!grads.all_finite()) {
    std::cerr << "adam_update: non-finite gradient, update refused at step " << state.t << "\n";
    return false;
  }
  state.t += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.t));
  const double c2 = 1.0 - std::pow(b2, double(state.t));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto p = params.tensors[i].values();
    auto g = grads.tensors[i].values();
    auto m = state.m.tensors[i].values();
    auto v = state.v.tensors[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
  return true;
}

PerturbedBatch perturb_positives(std::span<const RealTensor> batch,
                                 std::span<const double> amplitudes, RandomStream& stream) {
  if (amplitudes.empty()) throw std::invalid_argument("need at least one noise amplitude");
  for (double a : amplitudes)
    if (!(a >= 0.0)) throw std::invalid_argument("noise amplitudes must be >= 0");
  PerturbedBatch out;
  out.samples.reserve(batch.size());
  for (const auto& x : batch) {
    const double sigma = amplitudes[stream.index(amplitudes.size())];
    RealTensor y = x;
    if (sigma > 0.0)
      for (auto& v : y.values()) v += sigma * stream.normal();
    out.samples.push_back(std::move(y));
    out.sigmas.push_back(sigma);
  }
  return out;
}

void TrainConfig::validate() const {
  arch.validate();
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (noise_amplitudes.empty()) throw std::invalid_argument("need at least one noise amplitude");
  if (langevin_steps == 0) throw std::invalid_argument("langevin_steps must be >= 1");
  if (!(langevin_step > 0.0)) throw std::invalid_argument("langevin_step must be positive");
  if (sn_iterations < 1 || sn_init_iterations < 1)
    throw std::invalid_argument("spectral normalization needs >= 1 iteration");
}

TrainState make_train_state(const TrainConfig& config, RandomStream& stream) {
  config.validate();
  RandomStream init = stream.split(0xC0FFEE);
  EnergyParams params = init_params(config.arch, init, config.sn_init_iterations);
  AdamState adam = AdamState::for_params(params.weights, config.learning_rate);
  return TrainState{std::move(params), std::move(adam), 0,
                    ReplayBuffer(config.buffer_capacity, config.reuse_probability)};
}

RealTensor augment(const RealTensor& x, RandomStream& stream) {
  const std::size_t h = x.dim(1), w = x.dim(2);
  const bool flip_y = stream.uniform(0.0, 1.0) < 0.5;
  const bool flip_x = stream.uniform(0.0, 1.0) < 0.5;
  const bool transpose = h == w && stream.uniform(0.0, 1.0) < 0.5;
  RealTensor out(x.shape());
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        std::size_t sy = flip_y ? h - 1 - y : y;
        std::size_t sx = flip_x ? w - 1 - xx : xx;
        if (transpose) std::swap(sy, sx);
        out[(c * h + y) * w + xx] = x[(c * h + sy) * w + sx];
      }
  return out;
}

RealTensor random_crop(const RealTensor& x, std::size_t size, RandomStream& stream) {
  const std::size_t h = x.dim(1), w = x.dim(2);
  if (size > h || size > w) throw DimensionError("crop is larger than the image");
  const std::size_t y0 = stream.index(h - size + 1), x0 = stream.index(w - size + 1);
  RealTensor out({x.dim(0), size, size});
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t xx = 0; xx < size; ++xx)
        out[(c * size + y) * size + xx] = x[(c * h + y0 + y) * w + x0 + xx];
  return out;
}

RealTensor normalize_for_training(const ComplexImage& img) {
  const double m = img.max_magnitude();
  RealTensor t = to_channels(img, 0);
  if (m > 0.0) t *= 1.0 / m;
  return t;
}

std::vector<TrainLogEntry> train_more(TrainState& state, std::span<const RealTensor> dataset,
                                      const TrainConfig& config, const RandomStream& stream,
                                      const TrainCallback& on_iteration) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
  auto shape = dataset.front().shape();
  for (const auto& x : dataset)
    if (x.shape() != shape) throw DimensionError("training images must share one shape");
  if (config.patch > 0) {
    if (config.patch > shape[1] || config.patch > shape[2])
      throw DimensionError("patch size exceeds the training images");
    shape[1] = shape[2] = config.patch;
  }
  state.adam.learning_rate = config.learning_rate;

  const bool conditional = config.arch.conditional();
  const std::size_t n = config.batch_size;
  std::vector<TrainLogEntry> log;
  const auto t0 = std::chrono::steady_clock::now();

  LangevinOptions lopts;
  lopts.grad_clip = config.langevin_grad_clip;
  lopts.temperature = config.langevin_temperature;
  if (config.clamp_negatives) lopts.clamp = std::make_pair(-1.0, 1.0);

  for (std::size_t k = 0; k < config.iterations; ++k) {
    const std::size_t iter = state.iteration;
    RandomStream rs = stream.split(iter);

    std::vector<RealTensor> picked;
    picked.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const RealTensor& full = dataset[rs.index(dataset.size())];
      const RealTensor x = config.patch > 0 ? random_crop(full, config.patch, rs) : full;
      picked.push_back(config.augment ? augment(x, rs) : x);
    }
    PerturbedBatch pos = perturb_positives(picked, config.noise_amplitudes, rs);

    const double neg_sigma = config.noise_amplitudes[rs.index(config.noise_amplitudes.size())];
    std::vector<RealTensor> neg = state.buffer.init_negatives(n, shape, rs);
    const NetEnergy model(state.params);
    const RandomStream chain_root = rs.split(1);
    parallel_for(n, [&](std::size_t i) {
      RandomStream cs = chain_root.split(i);
      neg[i] = run_chain(model, neg[i], config.langevin_steps, config.langevin_step, neg_sigma, cs,
                         lopts);
    });

    std::vector<NetInput> pos_in, neg_in;
    for (std::size_t i = 0; i < n; ++i) {
      pos_in.push_back({pos.samples[i], conditional ? std::optional(pos.sigmas[i]) : std::nullopt});
      neg_in.push_back({neg[i], conditional ? std::optional(neg_sigma) : std::nullopt});
    }
    ContrastiveResult cr = contrastive_grad(state.params, pos_in, neg_in, config.beta);
    if (!std::isfinite(cr.stats.mean_energy_neg) ||
        std::abs(cr.stats.mean_energy_neg) > config.divergence_limit)
      throw DivergenceError("training diverged at iteration " + std::to_string(iter) +
                            ": mean negative energy " + std::to_string(cr.stats.mean_energy_neg));

    double gnorm = std::sqrt(cr.grad.squared_norm());
    if (config.grad_clip > 0.0 && gnorm > config.grad_clip) cr.grad *= config.grad_clip / gnorm;
    if (adam_update(state.adam, state.params.weights, cr.grad) && config.spectral_norm)
      state.params = spectral_normalize_all(std::move(state.params), config.sn_iterations);
    state.buffer.push(neg);

    TrainLogEntry e;
    e.iter = iter;
    e.mean_energy_pos = cr.stats.mean_energy_pos;
    e.mean_energy_neg = cr.stats.mean_energy_neg;
    e.gap = cr.stats.gap;
    e.grad_norm = gnorm;
    e.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(e);
    state.iteration += 1;
    if (on_iteration) on_iteration(e);
  }
  return log;
}

TrainResult train(std::span<const RealTensor> dataset, const TrainConfig& config,
                  RandomStream& stream, const TrainCallback& on_iteration) {
  if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
  TrainState state = make_train_state(config, stream);
  auto log = train_more(state, dataset, config, stream, on_iteration);
  return {std::move(state.params), std::move(log)};
}

}  // namespace ebmrec
