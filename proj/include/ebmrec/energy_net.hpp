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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebmrec/numerics.hpp"
#include "ebmrec/tensor.hpp"

namespace ebmrec {

/// One residual block. A downsampling block mean-pools 2x2 after the
/// residual add.
struct BlockSpec {
  std::size_t width = 64;
  bool downsample = false;
  bool operator==(const BlockSpec&) const = default;
};

/// Architecture descriptor of the residual energy network:
///   stem conv3x3 -> blocks... -> swish -> global sum pool -> dense(1).
/// in_channels is 2 (real, imag) or 3 (real, imag, constant sigma plane).
struct Architecture {
  std::size_t in_channels = 3;
  std::size_t stem_width = 64;
  std::vector<BlockSpec> blocks{{64, false}, {128, true}, {256, true}};

  bool conditional() const { return in_channels == 3; }
  /// Spatial size must be divisible by this.
  std::size_t downsample_factor() const;
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// Ordered collection of parameter-shaped tensors (weights or gradients).
struct ParamSet {
  std::vector<RealTensor> tensors;

  ParamSet zeros_like() const;
  std::size_t count() const;
  double squared_norm() const;
  bool all_finite() const;
  ParamSet& axpy(double a, const ParamSet& x);
  ParamSet& operator*=(double s);
  bool operator==(const ParamSet&) const = default;
};

/// All weights of the energy network plus the persistent power-iteration
/// vectors used by spectral normalization (one per weight matrix).
struct EnergyParams {
  Architecture arch;
  std::vector<std::string> names;
  ParamSet weights;
  std::vector<RealTensor> sn_u;

  std::size_t parameter_count() const { return weights.count(); }
  /// Indices into weights.tensors of the matrices that get normalized.
  std::vector<std::size_t> matrix_indices() const;
  const RealTensor& operator[](const std::string& name) const;
  RealTensor& operator[](const std::string& name);
  bool operator==(const EnergyParams&) const = default;
};

std::size_t parameter_count(const Architecture& arch);

/// All weights and biases zero.
EnergyParams zero_params(const Architecture& arch);
/// Weights ~ N(0, 1/fan_in), zero biases, then spectral normalization with
/// `sn_iterations` power iterations.
EnergyParams init_params(const Architecture& arch, RandomStream& stream, int sn_iterations = 50);

/// Network input: (2, H, W) real/imag channels, plus sigma for conditional
/// architectures.
struct NetInput {
  RealTensor image;
  std::optional<double> sigma;
};

double energy(const EnergyParams& params, const NetInput& input);
/// Gradient w.r.t. the two image channels; the sigma plane gets none.
RealTensor grad_input(const EnergyParams& params, const NetInput& input);

struct EnergyAndGrad {
  double energy = 0.0;
  RealTensor grad;
};
EnergyAndGrad energy_and_grad_input(const EnergyParams& params, const NetInput& input);

/// Gradient of sum_n weights[n] * energy(batch[n]) w.r.t. every parameter.
ParamSet grad_params(const EnergyParams& params, std::span<const NetInput> batch,
                     std::span<const double> weights);

/// Same, but the weight of sample n may depend on its energy:
/// weight_of(n, E_n). Energies are returned through `energies` if non-null.
/// Samples are reduced in index order, independent of thread count.
ParamSet grad_params_weighted(const EnergyParams& params, std::span<const NetInput> batch,
                              const std::function<double(std::size_t, double)>& weight_of,
                              std::vector<double>* energies = nullptr);

/// Divides each weight matrix (convs reshaped to out x in*k*k) by its
/// power-iteration estimate of the largest singular value. Zero matrices
/// pass through unchanged. The u vectors are warm-started and updated.
EnergyParams spectral_normalize_all(EnergyParams params, int iterations);

/// Power-iteration estimate of the top singular value of a rows x cols
/// row-major matrix, refining u in place.
double power_iteration(std::span<const double> matrix, std::size_t rows, std::size_t cols,
                       std::span<double> u, int iterations);

/// Scalar energy over (2, H, W) states, used by the sampler. The network
/// is one implementation; analytic energies are others.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;
  virtual EnergyAndGrad evaluate(const RealTensor& x, double sigma) const = 0;
  double energy(const RealTensor& x, double sigma) const { return evaluate(x, sigma).energy; }
  RealTensor grad_input(const RealTensor& x, double sigma) const {
    return evaluate(x, sigma).grad;
  }
};

/// Adapts EnergyParams to EnergyModel. The params must outlive the adapter.
class NetEnergy final : public EnergyModel {
 public:
  explicit NetEnergy(const EnergyParams& params) : params_(&params) {}
  EnergyAndGrad evaluate(const RealTensor& x, double sigma) const override;
  const EnergyParams& params() const { return *params_; }

 private:
  const EnergyParams* params_;
};

/// E(x) = 0.5 * ||x||^2, independent of sigma.
class QuadraticEnergy final : public EnergyModel {
 public:
  EnergyAndGrad evaluate(const RealTensor& x, double sigma) const override;
};

}  // namespace ebmrec
