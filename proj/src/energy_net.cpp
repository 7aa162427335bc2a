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
#include "ebmrec/energy_net.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ebmrec {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Activation map in (C, H, W) layout. Storage is over-aligned so Eigen's
// vectorized reductions see the same alignment on every allocation and sum
// in the same order regardless of which thread allocated the buffer.
struct Act {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double, Eigen::aligned_allocator<double>> v;

  Act() = default;
  Act(std::size_t c_, std::size_t h_, std::size_t w_) : c(c_), h(h_), w(w_), v(c_ * h_ * w_, 0.0) {}
  std::size_t hw() const { return h * w; }
  MatMap mat() { return MatMap(v.data(), Eigen::Index(c), Eigen::Index(hw())); }
  ConstMatMap mat() const { return ConstMatMap(v.data(), Eigen::Index(c), Eigen::Index(hw())); }
};

struct ConvSlot {
  std::size_t w = 0, b = 0, cin = 0, cout = 0, k = 3;
};

struct BlockSlots {
  ConvSlot conv1, conv2;
  std::optional<ConvSlot> shortcut;
  bool down = false;
};

struct Layout {
  ConvSlot stem;
  std::vector<BlockSlots> blocks;
  std::size_t dense_w = 0, dense_b = 0;
  std::size_t last_channels = 0;
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> shapes;
  std::vector<std::size_t> matrices;
};

Layout make_layout(const Architecture& arch) {
  arch.validate();
  Layout L;
  auto add = [&](std::string name, std::vector<std::size_t> shape, bool matrix) {
    L.names.push_back(std::move(name));
    L.shapes.push_back(std::move(shape));
    if (matrix) L.matrices.push_back(L.names.size() - 1);
    return L.names.size() - 1;
  };
  auto conv = [&](const std::string& prefix, std::size_t cin, std::size_t cout, std::size_t k) {
    ConvSlot s;
    s.cin = cin;
    s.cout = cout;
    s.k = k;
    s.w = add(prefix + ".w", {cout, cin, k, k}, true);
    s.b = add(prefix + ".b", {cout}, false);
    return s;
  };
  L.stem = conv("stem", arch.in_channels, arch.stem_width, 3);
  std::size_t c = arch.stem_width;
  for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
    const auto& spec = arch.blocks[i];
    const std::string p = "block" + std::to_string(i);
    BlockSlots b;
    b.conv1 = conv(p + ".conv1", c, spec.width, 3);
    b.conv2 = conv(p + ".conv2", spec.width, spec.width, 3);
    if (spec.width != c) b.shortcut = conv(p + ".shortcut", c, spec.width, 1);
    b.down = spec.downsample;
    L.blocks.push_back(b);
    c = spec.width;
  }
  L.last_channels = c;
  L.dense_w = add("dense.w", {1, c}, true);
  L.dense_b = add("dense.b", {1}, false);
  return L;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Act swish(const Act& x) {
  Act y(x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] * sigmoid(x.v[i]);
  return y;
}

// dy/dx of x*sigmoid(x), multiplied into g.
void swish_backward(const Act& x, Act& g) {
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const double s = sigmoid(x.v[i]);
    g.v[i] *= s * (1.0 + x.v[i] * (1.0 - s));
  }
}

// (cin*9, h*w) patch matrix with zero padding.
RowMat im2col3(const Act& in) {
  const std::size_t h = in.h, w = in.w;
  RowMat col = RowMat::Zero(Eigen::Index(in.c * 9), Eigen::Index(h * w));
  for (std::size_t ci = 0; ci < in.c; ++ci) {
    const double* src = in.v.data() + ci * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = col.data() + (ci * 9 + std::size_t(ky * 3 + kx)) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = long(y) + ky - 1;
          if (sy < 0 || sy >= long(h)) continue;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          const double* srow = src + std::size_t(sy) * w;
          double* drow = dst + y * w;
          for (std::size_t x = x0; x < x1; ++x) drow[x] = srow[long(x) + kx - 1];
        }
      }
    }
  }
  return col;
}

void col2im3(const RowMat& col, Act& out) {
  const std::size_t h = out.h, w = out.w;
  for (std::size_t ci = 0; ci < out.c; ++ci) {
    double* dst = out.v.data() + ci * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = col.data() + (ci * 9 + std::size_t(ky * 3 + kx)) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = long(y) + ky - 1;
          if (sy < 0 || sy >= long(h)) continue;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          double* drow = dst + std::size_t(sy) * w;
          const double* srow = src + y * w;
          for (std::size_t x = x0; x < x1; ++x) drow[long(x) + kx - 1] += srow[x];
        }
      }
    }
  }
}

ConstMatMap weight_matrix(const RealTensor& w, const ConvSlot& s) {
  return ConstMatMap(w.data(), Eigen::Index(s.cout), Eigen::Index(s.cin * s.k * s.k));
}

Act conv_forward(const Act& in, const ParamSet& p, const ConvSlot& s) {
  Act out(s.cout, in.h, in.w);
  const auto W = weight_matrix(p.tensors[s.w], s);
  if (s.k == 1) {
    out.mat().noalias() = W * in.mat();
  } else {
    const RowMat col = im2col3(in);
    out.mat().noalias() = W * col;
  }
  const RealTensor& b = p.tensors[s.b];
  for (std::size_t c = 0; c < s.cout; ++c) out.mat().row(Eigen::Index(c)).array() += b[c];
  return out;
}

// Accumulates dW/db into grads (if non-null) and returns dIn (if wanted).
void conv_backward(const Act& in, const ParamSet& p, const ConvSlot& s, const Act& dout,
                   ParamSet* grads, Act* din) {
  const auto W = weight_matrix(p.tensors[s.w], s);
  RowMat col;
  if (s.k == 3) col = im2col3(in);
  if (grads) {
    MatMap dW(grads->tensors[s.w].data(), Eigen::Index(s.cout), Eigen::Index(s.cin * s.k * s.k));
    if (s.k == 1)
      dW.noalias() += dout.mat() * in.mat().transpose();
    else
      dW.noalias() += dout.mat() * col.transpose();
    RealTensor& db = grads->tensors[s.b];
    for (std::size_t c = 0; c < s.cout; ++c) db[c] += dout.mat().row(Eigen::Index(c)).sum();
  }
  if (din) {
    if (s.k == 1) {
      din->mat().noalias() += W.transpose() * dout.mat();
    } else {
      const RowMat dcol = W.transpose() * dout.mat();
      col2im3(dcol, *din);
    }
  }
}

Act mean_pool2(const Act& in) {
  Act out(in.c, in.h / 2, in.w / 2);
  for (std::size_t c = 0; c < in.c; ++c)
    for (std::size_t y = 0; y < out.h; ++y)
      for (std::size_t x = 0; x < out.w; ++x) {
        const double* r0 = in.v.data() + (c * in.h + 2 * y) * in.w + 2 * x;
        const double* r1 = r0 + in.w;
        out.v[(c * out.h + y) * out.w + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  return out;
}

Act mean_pool2_backward(const Act& dout) {
  Act din(dout.c, dout.h * 2, dout.w * 2);
  for (std::size_t c = 0; c < din.c; ++c)
    for (std::size_t y = 0; y < din.h; ++y)
      for (std::size_t x = 0; x < din.w; ++x)
        din.v[(c * din.h + y) * din.w + x] = 0.25 * dout.v[(c * dout.h + y / 2) * dout.w + x / 2];
  return din;
}

struct BlockCache {
  Act x, a1, c1, a2;
};

struct Cache {
  Act input;
  std::vector<BlockCache> blocks;
  Act h_last;
  std::vector<double> pooled;
};

Act make_input(const Architecture& arch, const NetInput& in) {
  const RealTensor& img = in.image;
  if (img.rank() != 3 || img.dim(0) != 2)
    throw DimensionError("network input must be (2, H, W), got " + shape_string(img.shape()));
  const std::size_t h = img.dim(1), w = img.dim(2), f = arch.downsample_factor();
  if (h % f != 0 || w % f != 0)
    throw DimensionError("input " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by the network downsampling factor " + std::to_string(f));
  if (arch.conditional() && !in.sigma)
    throw DimensionError("conditional architecture needs a sigma channel");
  if (!arch.conditional() && in.sigma)
    throw DimensionError("unconditional architecture takes no sigma channel");
  Act a(arch.in_channels, h, w);
  std::copy(img.values().begin(), img.values().end(), a.v.begin());
  if (arch.conditional()) std::fill(a.v.begin() + long(2 * h * w), a.v.end(), *in.sigma);
  return a;
}

double forward(const Layout& L, const ParamSet& p, Act input, Cache* cache) {
  Act h = conv_forward(input, p, L.stem);
  if (cache) {
    cache->input = std::move(input);
    cache->blocks.clear();
  }
  for (const auto& b : L.blocks) {
    BlockCache bc;
    bc.a1 = swish(h);
    bc.c1 = conv_forward(bc.a1, p, b.conv1);
    bc.a2 = swish(bc.c1);
    Act s = conv_forward(bc.a2, p, b.conv2);
    if (b.shortcut) {
      const Act sc = conv_forward(h, p, *b.shortcut);
      for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] += sc.v[i];
    } else {
      for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] += h.v[i];
    }
    bc.x = std::move(h);
    h = b.down ? mean_pool2(s) : std::move(s);
    if (cache) cache->blocks.push_back(std::move(bc));
  }
  const Act a = swish(h);
  std::vector<double> pooled(a.c, 0.0);
  for (std::size_t c = 0; c < a.c; ++c) pooled[c] = a.mat().row(Eigen::Index(c)).sum();
  const RealTensor& dw = p.tensors[L.dense_w];
  double e = p.tensors[L.dense_b][0];
  for (std::size_t c = 0; c < a.c; ++c) e += dw[c] * pooled[c];
  if (cache) {
    cache->h_last = std::move(h);
    cache->pooled = std::move(pooled);
  }
  return e;
}

// Backpropagates dE through the cached forward pass. grads may be null
// (input gradient only); din may be null (parameter gradient only).
void backward(const Layout& L, const ParamSet& p, const Cache& cache, double dE, ParamSet* grads,
              Act* din) {
  const RealTensor& dw = p.tensors[L.dense_w];
  if (grads) {
    RealTensor& gdw = grads->tensors[L.dense_w];
    for (std::size_t c = 0; c < L.last_channels; ++c) gdw[c] += dE * cache.pooled[c];
    grads->tensors[L.dense_b][0] += dE;
  }
  Act g(cache.h_last.c, cache.h_last.h, cache.h_last.w);
  for (std::size_t c = 0; c < g.c; ++c) g.mat().row(Eigen::Index(c)).setConstant(dE * dw[c]);
  swish_backward(cache.h_last, g);

  for (std::size_t bi = L.blocks.size(); bi-- > 0;) {
    const auto& b = L.blocks[bi];
    const auto& bc = cache.blocks[bi];
    Act ds = b.down ? mean_pool2_backward(g) : std::move(g);
    Act da2(bc.a2.c, bc.a2.h, bc.a2.w);
    conv_backward(bc.a2, p, b.conv2, ds, grads, &da2);
    swish_backward(bc.c1, da2);
    Act da1(bc.a1.c, bc.a1.h, bc.a1.w);
    conv_backward(bc.a1, p, b.conv1, da2, grads, &da1);
    swish_backward(bc.x, da1);
    if (b.shortcut) {
      conv_backward(bc.x, p, *b.shortcut, ds, grads, &da1);
    } else {
      for (std::size_t i = 0; i < da1.v.size(); ++i) da1.v[i] += ds.v[i];
    }
    g = std::move(da1);
  }
  conv_backward(cache.input, p, L.stem, g, grads, din);
}

RealTensor image_grad(const Act& din) {
  RealTensor out({2, din.h, din.w});
  std::copy(din.v.begin(), din.v.begin() + long(2 * din.hw()), out.values().begin());
  return out;
}

void check_params(const EnergyParams& params, const Layout& L) {
  if (params.weights.tensors.size() != L.names.size())
    throw DimensionError("parameter tensor count does not match architecture");
  for (std::size_t i = 0; i < L.shapes.size(); ++i)
    if (params.weights.tensors[i].shape() != L.shapes[i])
      throw DimensionError("parameter " + L.names[i] + " has shape " +
                           shape_string(params.weights.tensors[i].shape()) + ", expected " +
                           shape_string(L.shapes[i]));
}

}  // namespace

std::size_t Architecture::downsample_factor() const {
  std::size_t f = 1;
  for (const auto& b : blocks)
    if (b.downsample) f *= 2;
  return f;
}

void Architecture::validate() const {
  if (in_channels != 2 && in_channels != 3)
    throw std::invalid_argument("in_channels must be 2 or 3");
  if (stem_width == 0) throw std::invalid_argument("stem width must be positive");
  for (const auto& b : blocks)
    if (b.width == 0) throw std::invalid_argument("block width must be positive");
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  z.tensors.reserve(tensors.size());
  for (const auto& t : tensors) z.tensors.emplace_back(t.shape());
  return z;
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

double ParamSet::squared_norm() const {
  double s = 0.0;
  for (const auto& t : tensors) s += t.squared_norm();
  return s;
}

bool ParamSet::all_finite() const {
  return std::all_of(tensors.begin(), tensors.end(), [](const auto& t) { return t.all_finite(); });
}

ParamSet& ParamSet::axpy(double a, const ParamSet& x) {
  if (x.tensors.size() != tensors.size()) throw DimensionError("parameter set size mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i].axpy(a, x.tensors[i]);
  return *this;
}

ParamSet& ParamSet::operator*=(double s) {
  for (auto& t : tensors) t *= s;
  return *this;
}

std::vector<std::size_t> EnergyParams::matrix_indices() const {
  return make_layout(arch).matrices;
}

const RealTensor& EnergyParams::operator[](const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no parameter named " + name);
  return weights.tensors[std::size_t(it - names.begin())];
}

RealTensor& EnergyParams::operator[](const std::string& name) {
  return const_cast<RealTensor&>(std::as_const(*this)[name]);
}

std::size_t parameter_count(const Architecture& arch) {
  const Layout L = make_layout(arch);
  std::size_t n = 0;
  for (const auto& s : L.shapes)
    n += std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  return n;
}

EnergyParams zero_params(const Architecture& arch) {
  const Layout L = make_layout(arch);
  EnergyParams p;
  p.arch = arch;
  p.names = L.names;
  for (const auto& s : L.shapes) p.weights.tensors.emplace_back(s);
  for (auto m : L.matrices) {
    const std::size_t rows = L.shapes[m][0];
    p.sn_u.emplace_back(std::vector<std::size_t>{rows}, 1.0 / std::sqrt(double(rows)));
  }
  return p;
}

EnergyParams init_params(const Architecture& arch, RandomStream& stream, int sn_iterations) {
  EnergyParams p = zero_params(arch);
  const Layout L = make_layout(arch);
  for (auto m : L.matrices) {
    RealTensor& w = p.weights.tensors[m];
    const double fan_in = double(w.size() / w.dim(0));
    for (auto& v : w.values()) v = stream.normal() / std::sqrt(fan_in);
  }
  for (auto& u : p.sn_u) {
    for (auto& v : u.values()) v = stream.normal();
    u *= 1.0 / std::sqrt(u.squared_norm());
  }
  return spectral_normalize_all(std::move(p), sn_iterations);
}

double energy(const EnergyParams& params, const NetInput& input) {
  const Layout L = make_layout(params.arch);
  check_params(params, L);
  return forward(L, params.weights, make_input(params.arch, input), nullptr);
}

EnergyAndGrad energy_and_grad_input(const EnergyParams& params, const NetInput& input) {
  const Layout L = make_layout(params.arch);
  check_params(params, L);
  Cache cache;
  EnergyAndGrad out;
  out.energy = forward(L, params.weights, make_input(params.arch, input), &cache);
  Act din(cache.input.c, cache.input.h, cache.input.w);
  backward(L, params.weights, cache, 1.0, nullptr, &din);
  out.grad = image_grad(din);
  return out;
}

RealTensor grad_input(const EnergyParams& params, const NetInput& input) {
  return energy_and_grad_input(params, input).grad;
}

ParamSet grad_params_weighted(const EnergyParams& params, std::span<const NetInput> batch,
                              const std::function<double(std::size_t, double)>& weight_of,
                              std::vector<double>* energies) {
  if (batch.empty()) throw std::invalid_argument("grad_params needs a nonempty batch");
  const Layout L = make_layout(params.arch);
  check_params(params, L);
  ParamSet total = params.weights.zeros_like();
  if (energies) energies->assign(batch.size(), 0.0);

  // Process in waves of `workers` samples; each sample owns its gradient
  // buffer and buffers are summed in index order.
  const std::size_t workers = std::max<std::size_t>(1, std::min(thread_count(), batch.size()));
  std::vector<ParamSet> partial(workers);
  std::vector<double> energy_of(batch.size());
  for (std::size_t start = 0; start < batch.size(); start += workers) {
    const std::size_t n = std::min(workers, batch.size() - start);
    parallel_for(n, [&](std::size_t j) {
      const std::size_t idx = start + j;
      Cache cache;
      const double e = forward(L, params.weights, make_input(params.arch, batch[idx]), &cache);
      energy_of[idx] = e;
      const double wgt = weight_of(idx, e);
      partial[j] = params.weights.zeros_like();
      if (wgt != 0.0) backward(L, params.weights, cache, wgt, &partial[j], nullptr);
    });
    for (std::size_t j = 0; j < n; ++j) total.axpy(1.0, partial[j]);
  }
  if (energies) *energies = std::move(energy_of);
  return total;
}

ParamSet grad_params(const EnergyParams& params, std::span<const NetInput> batch,
                     std::span<const double> weights) {
  if (batch.empty()) throw std::invalid_argument("grad_params needs a nonempty batch");
  if (weights.size() != batch.size())
    throw DimensionError("grad_params: weights and batch differ in length");
  return grad_params_weighted(params, batch,
                              [&](std::size_t n, double) { return weights[n]; });
}

double power_iteration(std::span<const double> matrix, std::size_t rows, std::size_t cols,
                       std::span<double> u, int iterations) {
  const ConstMatMap W(matrix.data(), Eigen::Index(rows), Eigen::Index(cols));
  Eigen::Map<Eigen::VectorXd> uv(u.data(), Eigen::Index(rows));
  if (!(uv.norm() > 0.0) || !uv.allFinite()) uv.setConstant(1.0 / std::sqrt(double(rows)));
  Eigen::VectorXd v;
  double sigma = 0.0;
  for (int it = 0; it < std::max(1, iterations); ++it) {
    v = W.transpose() * uv;
    double nv = v.norm();
    if (nv == 0.0) {
      // u orthogonal to the range; restart from a basis vector sweep
      for (std::size_t r = 0; r < rows && nv == 0.0; ++r) {
        uv.setZero();
        uv[Eigen::Index(r)] = 1.0;
        v = W.transpose() * uv;
        nv = v.norm();
      }
      if (nv == 0.0) return 0.0;
    }
    v /= nv;
    Eigen::VectorXd wu = W * v;
    sigma = wu.norm();
    if (sigma == 0.0) return 0.0;
    uv = wu / sigma;
  }
  return sigma;
}

EnergyParams spectral_normalize_all(EnergyParams params, int iterations) {
  if (iterations < 1) throw std::invalid_argument("spectral normalization needs >= 1 iteration");
  const auto mats = params.matrix_indices();
  if (params.sn_u.size() != mats.size())
    throw DimensionError("spectral-norm state does not match architecture");
  for (std::size_t i = 0; i < mats.size(); ++i) {
    RealTensor& w = params.weights.tensors[mats[i]];
    const std::size_t rows = w.dim(0), cols = w.size() / rows;
    const double sigma = power_iteration(w.values(), rows, cols, params.sn_u[i].values(), iterations);
    if (sigma > 0.0) w *= 1.0 / sigma;
  }
  return params;
}

EnergyAndGrad NetEnergy::evaluate(const RealTensor& x, double sigma) const {
  NetInput in{x, params_->arch.conditional() ? std::optional<double>(sigma) : std::nullopt};
  return energy_and_grad_input(*params_, in);
}

EnergyAndGrad QuadraticEnergy::evaluate(const RealTensor& x, double) const {
  return {0.5 * x.squared_norm(), x};
}

}  // namespace ebmrec
