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
#include <limits>
#include <set>

#include "doctest.h"
#include "ebmrec/sampler.hpp"
#include "test_util.hpp"

using namespace ebmrec;

namespace {

class ZeroEnergy final : public EnergyModel {
 public:
  EnergyAndGrad evaluate(const RealTensor& x, double) const override {
    return {0.0, RealTensor(x.shape())};
  }
};

class NanEnergy final : public EnergyModel {
 public:
  EnergyAndGrad evaluate(const RealTensor& x, double) const override {
    RealTensor g(x.shape());
    g[0] = std::numeric_limits<double>::quiet_NaN();
    return {0.0, g};
  }
};

// Counts gradient evaluations.
class CountingEnergy final : public EnergyModel {
 public:
  mutable int calls = 0;
  EnergyAndGrad evaluate(const RealTensor& x, double) const override {
    ++calls;
    return {0.5 * x.squared_norm(), x};
  }
};

struct Moments {
  double mean = 0.0, var = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= double(v.size());
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= double(v.size() - 1);
  return m;
}

}  // namespace

TEST_CASE("zero energy gives a pure random walk") {
  const ZeroEnergy zero;
  RandomStream rs(1, 0), init(2, 0);
  const RealTensor x = gaussian(init, {2, 64, 64}, 1.0);
  const RealTensor y = langevin_step(zero, x, 0.01, 0.1, rs);
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) d.push_back(y[i] - x[i]);
  const Moments m = moments(d);
  CHECK(std::abs(m.mean) < 0.005);
  CHECK(std::abs(m.var - 0.01) < 0.0005);
}

TEST_CASE("quadratic energy update is the analytic AR(1) step") {
  const QuadraticEnergy q;
  RandomStream init(3, 0);
  const RealTensor x = gaussian(init, {2, 8, 8}, 1.0);
  RandomStream a(4, 0), b(4, 0);
  const double step = 0.05;
  const RealTensor y = langevin_step(q, x, step, 0.3, a);
  const RealTensor z = gaussian(b, x.shape(), std::sqrt(step));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - ((1 - step / 2) * x[i] + z[i])) < 1e-15);
}

TEST_CASE("langevin steps are deterministic and use one gradient each") {
  const CountingEnergy c;
  RandomStream init(5, 0);
  const RealTensor x = gaussian(init, {2, 8, 8}, 1.0);
  RandomStream a(6, 0), b(6, 0);
  CHECK(langevin_step(c, x, 0.1, 0.1, a) == langevin_step(c, x, 0.1, 0.1, b));
  CHECK(c.calls == 2);
  RandomStream d(6, 0), e(6, 0);
  CHECK(run_chain(c, x, 1, 0.1, 0.1, d) == langevin_step(c, x, 0.1, 0.1, e));
  c.calls = 0;
  RandomStream f(6, 0);
  (void)run_chain(c, x, 17, 0.1, 0.1, f);
  CHECK(c.calls == 17);
  CHECK_THROWS_AS(run_chain(c, x, 0, 0.1, 0.1, f), std::invalid_argument);
  CHECK_THROWS_AS(langevin_step(c, x, 0.0, 0.1, f), std::invalid_argument);
}

TEST_CASE("non-finite gradients abort the chain") {
  const NanEnergy nan;
  RandomStream rs(7, 0);
  CHECK_THROWS_AS(langevin_step(nan, RealTensor({2, 4, 4}), 0.1, 0.1, rs), NumericalError);
}

TEST_CASE("discretized chain reaches the AR(1) stationary law") {
  // x <- (1 - s/2) x + N(0, s) has stationary variance s / (1 - (1 - s/2)^2)
  // = 1 / (1 - s/4).
  const QuadraticEnergy q;
  const double s = 0.1, expect = 1.0 / (1.0 - s / 4.0);
  RandomStream rs(2024, 0);
  RealTensor x({1}, 0.0);
  std::vector<double> trace;
  for (int i = 0; i < 1000; ++i) x = langevin_step(q, x, s, 0.0, rs);  // burn-in
  for (int i = 0; i < 100000; ++i) {
    x = langevin_step(q, x, s, 0.0, rs);
    trace.push_back(x[0]);
  }
  const Moments m = moments(trace);
  MESSAGE("mean ", m.mean, " variance ", m.var, " target ", expect);
  CHECK(std::abs(m.mean) < 0.05);
  CHECK(std::abs(m.var / expect - 1.0) < 0.03);
}

TEST_CASE("temperature scales the stationary variance") {
  const QuadraticEnergy q;
  const double s = 0.1, T = 0.25;
  LangevinOptions opts;
  opts.temperature = T;
  RandomStream rs(99, 0);
  RealTensor x({64}, 0.0);
  std::vector<double> trace;
  for (int i = 0; i < 20000; ++i) {
    x = langevin_step(q, x, s, 0.0, rs, opts);
    if (i >= 500)
      for (double v : x.values()) trace.push_back(v);
  }
  CHECK(std::abs(moments(trace).var / (T / (1.0 - s / 4.0)) - 1.0) < 0.03);
}

TEST_CASE("clamp and gradient clipping") {
  const QuadraticEnergy q;
  LangevinOptions opts;
  opts.clamp = std::make_pair(-1.0, 1.0);
  RandomStream rs(8, 0);
  RealTensor x({2, 8, 8}, 5.0);
  const RealTensor y = langevin_step(q, x, 0.5, 0.1, rs, opts);
  for (double v : y.values()) CHECK((v >= -1.0 && v <= 1.0));

  // clipping the gradient norm to c moves a noiseless-ish state by at most s/2 * c
  LangevinOptions clip;
  clip.grad_clip = 1.0;
  clip.temperature = 0.0;
  const RealTensor z = langevin_step(q, x, 0.5, 0.1, rs, clip);
  CHECK(std::sqrt((z - x).squared_norm()) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("disjoint streams produce uncorrelated chains") {
  const QuadraticEnergy q;
  const RandomStream root(11, 0);
  RandomStream a = root.split(1), b = root.split(2);
  RealTensor xa({1}, 0.0), xb({1}, 0.0);
  std::vector<double> ta, tb;
  for (int i = 0; i < 20000; ++i) {
    xa = langevin_step(q, xa, 0.5, 0.0, a);
    xb = langevin_step(q, xb, 0.5, 0.0, b);
    ta.push_back(xa[0]);
    tb.push_back(xb[0]);
  }
  const Moments ma = moments(ta), mb = moments(tb);
  double cov = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) cov += (ta[i] - ma.mean) * (tb[i] - mb.mean);
  cov /= double(ta.size() - 1);
  CHECK(std::abs(cov / std::sqrt(ma.var * mb.var)) < 0.05);
  RandomStream a2 = root.split(1);
  RealTensor xa2({1}, 0.0);
  for (int i = 0; i < 20000; ++i) xa2 = langevin_step(q, xa2, 0.5, 0.0, a2);
  CHECK(xa2 == xa);
}

TEST_CASE("annealed step sizes") {
  CHECK(anneal_step_size(2e-5, 0.01, 0.01) == 2e-5);
  CHECK(anneal_step_size(1e-5, 1.0, 0.01) == doctest::Approx(0.1).epsilon(1e-12));
  const NoiseSchedule s = NoiseSchedule::geometric(0.5, 0.01, 10, 2e-5, 20);
  REQUIRE(s.sigmas.size() == 10);
  CHECK(s.sigmas.front() == doctest::Approx(0.5));
  CHECK(s.sigmas.back() == doctest::Approx(0.01));
  for (std::size_t i = 1; i < s.sigmas.size(); ++i) {
    CHECK(s.sigmas[i] < s.sigmas[i - 1]);
    CHECK(anneal_step_size(s.base_step, s.sigmas[i], s.last_sigma()) <=
          anneal_step_size(s.base_step, s.sigmas[i - 1], s.last_sigma()));
  }
  NoiseSchedule bad = s;
  bad.sigmas = {0.1, 0.2};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.sigmas = {0.1, 0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(anneal_step_size(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("tiled evaluation averages gradients across overlaps") {
  const QuadraticEnergy q;
  const TiledEnergy tiled(q, 32, 8);
  RandomStream rs(12, 0);
  const RealTensor x = gaussian(rs, {2, 64, 64}, 1.0);
  const EnergyAndGrad eg = tiled.evaluate(x, 0.1);
  CHECK(testing::max_abs_diff(eg.grad, x) < 1e-14);
  CHECK(eg.energy > 0.5 * x.squared_norm());  // overlaps counted more than once
  // a state no larger than one tile is passed through whole
  const RealTensor small = gaussian(rs, {2, 16, 16}, 1.0);
  CHECK(TiledEnergy(q, 32, 8).evaluate(small, 0.1).energy == doctest::Approx(0.5 * small.squared_norm()));
}

TEST_CASE("replay buffer initialization") {
  const std::vector<std::size_t> shape{2, 4, 4};
  RandomStream rs(13, 0);
  ReplayBuffer empty(10, 0.95);
  for (const auto& s : empty.init_negatives(8, shape, rs)) {
    CHECK(s.shape() == shape);
    for (double v : s.values()) CHECK((v >= -1.0 && v <= 1.0));
  }

  ReplayBuffer never(10, 0.0);
  const std::vector<RealTensor> stored{RealTensor(shape, 7.0)};
  never.push(stored);
  for (const auto& s : never.init_negatives(16, shape, rs)) CHECK(s != stored[0]);

  ReplayBuffer always(10, 1.0);
  always.push(stored);
  for (const auto& s : always.init_negatives(16, shape, rs)) CHECK(s == stored[0]);
}

TEST_CASE("replay buffer is a bounded FIFO") {
  const std::vector<std::size_t> shape{2, 4, 4};
  ReplayBuffer b(5, 1.0);
  std::vector<RealTensor> batch;
  for (int i = 0; i < 3; ++i) batch.emplace_back(shape, double(i));
  b.push(batch);
  CHECK(b.size() == 3);
  std::vector<RealTensor> more;
  for (int i = 3; i < 6; ++i) more.emplace_back(shape, double(i));
  b.push(more);
  CHECK(b.size() == 5);
  CHECK(b.entries().front()[0] == 1.0);  // entry 0 evicted first
  RandomStream rs(14, 0);
  std::set<double> seen;
  for (const auto& s : b.init_negatives(500, shape, rs)) {
    CHECK((s[0] >= 1.0 && s[0] <= 5.0));
    seen.insert(s[0]);
  }
  CHECK(seen.size() == 5);
  CHECK_THROWS_AS(ReplayBuffer(0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(ReplayBuffer(4, 1.5), std::invalid_argument);
}

TEST_CASE("replay buffer reuse frequency") {
  const std::vector<std::size_t> shape{2, 4, 4};
  ReplayBuffer b(100, 0.95);
  std::vector<RealTensor> fill;
  for (int i = 0; i < 100; ++i) fill.emplace_back(shape, 5.0 + i);
  b.push(fill);
  RandomStream rs(15, 0);
  std::size_t reused = 0;
  const auto draws = b.init_negatives(10000, shape, rs);
  for (const auto& s : draws) reused += s[0] >= 5.0;
  CHECK(std::abs(double(reused) / 1e4 - 0.95) < 0.02);
}
