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
#include "doctest.h"
#include "ebmrec/kspace.hpp"
#include "ebmrec/metrics.hpp"
#include "ebmrec/phantom.hpp"
#include "test_util.hpp"

using namespace ebmrec;
using ebmrec::testing::as_vector;
using ebmrec::testing::dense_dft;
using ebmrec::testing::max_abs_diff;
using ebmrec::testing::random_image;

namespace {

constexpr MaskPattern kAllPatterns[] = {MaskPattern::cartesian1d, MaskPattern::pseudo_radial,
                                        MaskPattern::random2d, MaskPattern::poisson_disk};

SamplingMask mask_of(MaskPattern p, double R, std::size_t n = 64, std::uint64_t seed = 1,
                     double cf = kDefaultCenterFraction) {
  RandomStream rs(seed, 0);
  return make_mask(p, R, n, n, cf, rs);
}

// Frequency index in centered coordinates.
long freq(std::size_t i, std::size_t n) { return i < n / 2 ? long(i) : long(i) - long(n); }

// 0.5 ||P F x - y||^2 + 0.5 lambda ||x - x_tilde||^2 (the factor is irrelevant
// for comparisons).
double dc_objective(const ComplexImage& x, const ComplexImage& xt, const KSpaceMeasurement& y,
                    double lambda) {
  const ComplexImage k = fft2(x);
  double data = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i)
    if (y.mask.keep[i]) data += std::norm(k.values()[i] - y.data.values()[i]);
  return data + lambda * (x - xt).squared_norm();
}

// Dense matrix for E = P F S over all coils (rows: coil-major kept entries).
Eigen::MatrixXcd dense_encoding(const SamplingMask& m, const CoilSensitivities* coils) {
  const std::size_t n = m.height * m.width;
  const Eigen::MatrixXcd F = dense_dft(m.height, m.width);
  const std::size_t nc = coils ? coils->count() : 1;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (m.keep[i]) kept.push_back(i);
  Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(long(nc * kept.size()), long(n));
  for (std::size_t c = 0; c < nc; ++c) {
    Eigen::MatrixXcd FS = F;
    if (coils)
      for (std::size_t j = 0; j < n; ++j) FS.col(long(j)) *= coils->maps.coil(c)[j];
    for (std::size_t r = 0; r < kept.size(); ++r) E.row(long(c * kept.size() + r)) = FS.row(long(kept[r]));
  }
  return E;
}

Eigen::VectorXcd kept_data(const KSpaceMeasurement& y) {
  std::vector<cdouble> v;
  for (std::size_t c = 0; c < y.data.coils(); ++c)
    for (std::size_t i = 0; i < y.mask.keep.size(); ++i)
      if (y.mask.keep[i]) v.push_back(y.data.coil(c)[i]);
  return Eigen::Map<Eigen::VectorXcd>(v.data(), long(v.size()));
}

// Sensitivities with random smooth phase and magnitude, normalized to SOS 1.
CoilSensitivities random_sensitivities(std::size_t nc, std::size_t h, std::size_t w,
                                       std::uint64_t seed) {
  CoilSensitivities s{random_image(h, w, seed, nc)};
  for (std::size_t i = 0; i < h * w; ++i) {
    double ss = 0.0;
    for (std::size_t c = 0; c < nc; ++c) ss += std::norm(s.maps.coil(c)[i]);
    for (std::size_t c = 0; c < nc; ++c) s.maps.coil(c)[i] /= std::sqrt(ss);
  }
  return s;
}

}  // namespace

TEST_CASE("full sampling gives an all-true mask") {
  for (auto p : kAllPatterns) {
    const SamplingMask m = mask_of(p, 1.0);
    CHECK(m.kept_count() == 64 * 64);
  }
}

TEST_CASE("cartesian mask keeps whole rows and the center") {
  const SamplingMask m = mask_of(MaskPattern::cartesian1d, 4.0, 64, 3, 0.0625);
  std::size_t rows = 0;
  for (std::size_t r = 0; r < 64; ++r) {
    std::size_t k = 0;
    for (std::size_t c = 0; c < 64; ++c) k += m.kept(r, c);
    CHECK((k == 0 || k == 64));
    rows += k == 64;
    if (std::abs(freq(r, 64)) <= 1 || freq(r, 64) == -2) CHECK(k == 64);
  }
  CHECK(rows >= 14);
  CHECK(rows <= 18);
}

TEST_CASE("pseudo-radial mask at R = 5") {
  const SamplingMask m = mask_of(MaskPattern::pseudo_radial, 5.0);
  CHECK(m.kept_fraction() >= 0.17);
  CHECK(m.kept_fraction() <= 0.23);
  CHECK(m.kept(0, 0));
}

TEST_CASE("every pattern hits its target fraction and keeps the center") {
  for (auto p : kAllPatterns)
    for (double R : {2.0, 3.0, 4.0, 5.0, 6.0, 8.0})
      for (std::size_t n : {32u, 64u, 128u}) {
        const SamplingMask m = mask_of(p, R, n, 7);
        INFO(to_string(p), " R=", R, " n=", n);
        CHECK(m.kept_fraction() >= 0.85 / R);
        CHECK(m.kept_fraction() <= 1.15 / R);
        CHECK(m.kept(0, 0));
        CHECK(m.pattern == p);
        CHECK(m.acceleration == R);
        if (p != MaskPattern::cartesian1d) {
          // every location within the center disk radius is kept
          const double rad = std::sqrt(kDefaultCenterFraction * double(n * n) / std::numbers::pi);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
              const double d = std::hypot(double(freq(r, n)), double(freq(c, n)));
              if (d < rad - 1.0) CHECK(m.kept(r, c));
            }
        }
      }
}

TEST_CASE("masks are reproducible and reject infeasible requests") {
  for (auto p : kAllPatterns) {
    CHECK(mask_of(p, 4.0, 64, 9) == mask_of(p, 4.0, 64, 9));
    CHECK_THROWS_AS(mask_of(p, 4.0, 64, 1, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(mask_of(p, 0.5, 64, 1), std::invalid_argument);
  }
  CHECK(parse_mask_pattern("radial") == MaskPattern::pseudo_radial);
  CHECK(parse_mask_pattern("poisson_disk") == MaskPattern::poisson_disk);
  CHECK_THROWS_AS(parse_mask_pattern("spiral"), std::invalid_argument);
}

TEST_CASE("forward operator") {
  const ComplexImage x = random_image(16, 16, 1);
  const SamplingMask full = mask_of(MaskPattern::random2d, 1.0, 16);
  CHECK(forward(x, full, nullptr, 0.0).data == fft2(x));

  const SamplingMask m = mask_of(MaskPattern::random2d, 4.0, 16, 2);
  RandomStream rs(3, 0);
  const KSpaceMeasurement noise_only = forward(ComplexImage(16, 16), m, nullptr, 0.1, &rs);
  for (std::size_t i = 0; i < m.keep.size(); ++i) {
    if (m.keep[i])
      CHECK(std::abs(noise_only.data.values()[i]) > 0.0);
    else
      CHECK(noise_only.data.values()[i] == cdouble(0.0));
  }

  ComplexImage delta(16, 16);
  delta(0, 0) = 1.0;
  const KSpaceMeasurement yd = forward(delta, m, nullptr, 0.0);
  for (std::size_t i = 0; i < m.keep.size(); ++i)
    CHECK(std::abs(yd.data.values()[i] - (m.keep[i] ? cdouble(1.0 / 16.0) : cdouble(0.0))) < 1e-15);
}

TEST_CASE("forward is linear, with and without coils") {
  const ComplexImage a = random_image(32, 32, 4), b = random_image(32, 32, 5);
  const cdouble ca(1.5, -0.5), cb(-0.25, 2.0);
  const SamplingMask m = mask_of(MaskPattern::poisson_disk, 3.0, 32, 6);
  const CoilSensitivities s = simulate_sensitivities(4, 32, 32);
  for (const CoilSensitivities* coils : {static_cast<const CoilSensitivities*>(nullptr), &s}) {
    const ComplexImage lhs = forward(ca * a + cb * b, m, coils, 0.0).data;
    const ComplexImage rhs = ca * forward(a, m, coils, 0.0).data + cb * forward(b, m, coils, 0.0).data;
    CHECK(max_abs_diff(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("forward noise has the requested total standard deviation") {
  const SamplingMask full = mask_of(MaskPattern::random2d, 1.0, 128);
  RandomStream rs(8, 0);
  const KSpaceMeasurement y = forward(ComplexImage(128, 128), full, nullptr, 0.2, &rs);
  const double var = y.data.squared_norm() / double(y.data.size());
  CHECK(std::abs(var - 0.04) < 0.002);
  CHECK_THROWS(forward(ComplexImage(128, 128), full, nullptr, 0.2, nullptr));
}

TEST_CASE("forward rejects mismatched inputs") {
  const SamplingMask m = mask_of(MaskPattern::random2d, 2.0, 16);
  CHECK_THROWS_AS(forward(random_image(32, 32, 1), m, nullptr, 0.0), DimensionError);
  CHECK_THROWS_AS(forward(random_image(16, 16, 1, 2), m, nullptr, 0.0), DimensionError);
  const CoilSensitivities s = simulate_sensitivities(2, 32, 32);
  CHECK_THROWS_AS(forward(random_image(16, 16, 1), m, &s, 0.0), DimensionError);
}

TEST_CASE("zero-filled baseline") {
  const ComplexImage x = random_image(32, 32, 10);
  const SamplingMask full = mask_of(MaskPattern::random2d, 1.0, 32);
  CHECK(max_abs_diff(zero_filled(forward(x, full, nullptr, 0.0)), x) < 1e-12);

  KSpaceMeasurement zero = forward(x, full, nullptr, 0.0);
  zero.data = ComplexImage(32, 32);
  CHECK(zero_filled(zero).squared_norm() == 0.0);

  RandomStream rs(11, 0);
  PhantomSpec spec;
  const ComplexImage ph = make_phantom(spec, rs);
  const SamplingMask m4 = mask_of(MaskPattern::cartesian1d, 4.0, 64, 12);
  const SamplingMask m1 = mask_of(MaskPattern::cartesian1d, 1.0, 64, 12);
  CHECK(psnr(ph, zero_filled(forward(ph, m4, nullptr, 0.0))) <
        psnr(ph, zero_filled(forward(ph, m1, nullptr, 0.0))));

  // with sensitivities and a full mask the coil combination is exact
  const CoilSensitivities s = simulate_sensitivities(4, 32, 32);
  CHECK(max_abs_diff(zero_filled(forward(x, full, &s, 0.0), &s), x) < 1e-12);
  // calibration-free combination: RSS magnitude, phase from coil 0
  const ComplexImage rss = zero_filled(forward(x, full, &s, 0.0));
  for (std::size_t i = 0; i < x.pixels(); ++i) CHECK(std::abs(std::abs(rss.values()[i]) - std::abs(x.values()[i])) < 1e-12);
}

TEST_CASE("hard data consistency") {
  const ComplexImage x = random_image(16, 16, 20), xt = random_image(16, 16, 21);
  const SamplingMask m = mask_of(MaskPattern::random2d, 3.0, 16, 22);
  const KSpaceMeasurement y = forward(x, m, nullptr, 0.0);
  const ComplexImage p = dc_project_single(xt, y, 0.0);
  const ComplexImage kp = fft2(p), kt = fft2(xt);
  for (std::size_t i = 0; i < m.keep.size(); ++i) {
    if (m.keep[i])
      CHECK(std::abs(kp.values()[i] - y.data.values()[i]) < 1e-12);
    else
      CHECK(std::abs(kp.values()[i] - kt.values()[i]) < 1e-12);
  }
  CHECK(max_abs_diff(dc_project_single(p, y, 0.0), p) < 1e-12);
  CHECK_THROWS_AS(dc_project_single(xt, y, -1.0), std::invalid_argument);
}

TEST_CASE("soft data consistency limits") {
  const ComplexImage x = random_image(16, 16, 23), xt = random_image(16, 16, 24);
  const SamplingMask m = mask_of(MaskPattern::pseudo_radial, 3.0, 16, 25);
  const KSpaceMeasurement y = forward(x, m, nullptr, 0.0);
  const ComplexImage p = dc_project_single(xt, y, 1e9);
  CHECK(std::sqrt((p - xt).squared_norm() / xt.squared_norm()) < 1e-6);
}

TEST_CASE("single-coil projection matches a dense solve") {
  // (F_p^H F_p + lambda I) x = F_p^H y + lambda x_tilde. At lambda = 0 the
  // system is singular; its solution set's member closest to x_tilde (the
  // lambda -> 0 limit) is x_tilde + pinv(F_p) (y - F_p x_tilde).
  for (int trial = 0; trial < 3; ++trial) {
    const ComplexImage x = random_image(8, 8, 30 + trial), xt = random_image(8, 8, 40 + trial);
    const SamplingMask m = mask_of(MaskPattern::random2d, 2.0, 8, 50 + trial, 0.0);
    RandomStream rs(60 + trial, 0);
    const KSpaceMeasurement y = forward(x, m, nullptr, 0.05, &rs);
    const Eigen::MatrixXcd Fp = dense_encoding(m, nullptr);
    const Eigen::VectorXcd yv = kept_data(y), xtv = as_vector(xt);
    for (double lambda : {0.0, 0.1, 1.0, 10.0}) {
      Eigen::VectorXcd ref;
      if (lambda == 0.0) {
        ref = xtv + Fp.completeOrthogonalDecomposition().solve(yv - Fp * xtv);
      } else {
        const Eigen::MatrixXcd A = Fp.adjoint() * Fp + lambda * Eigen::MatrixXcd::Identity(64, 64);
        ref = A.partialPivLu().solve(Fp.adjoint() * yv + lambda * xtv);
      }
      const Eigen::VectorXcd got = as_vector(dc_project_single(xt, y, lambda));
      INFO("lambda=", lambda);
      CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("projection minimizes the data-consistency objective") {
  for (int trial = 0; trial < 5; ++trial) {
    const ComplexImage x = random_image(16, 16, 70 + trial), xt = random_image(16, 16, 80 + trial);
    const SamplingMask m = mask_of(MaskPattern::poisson_disk, 4.0, 16, 90 + trial);
    RandomStream rs(100 + trial, 0);
    const KSpaceMeasurement y = forward(x, m, nullptr, 0.1, &rs);
    for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0}) {
      const ComplexImage p = dc_project_single(xt, y, lambda);
      const double f = dc_objective(p, xt, y, lambda);
      CHECK(f <= dc_objective(xt, xt, y, lambda) + 1e-12);
      CHECK(f <= dc_objective(zero_filled(y), xt, y, lambda) + 1e-12);
    }
  }
}

TEST_CASE("multi-coil projection") {
  // one coil with unit sensitivity reduces to the single-coil projection
  const ComplexImage x = random_image(16, 16, 110), xt = random_image(16, 16, 111);
  const SamplingMask m = mask_of(MaskPattern::random2d, 3.0, 16, 112);
  CoilSensitivities one{ComplexImage(16, 16, 1)};
  for (auto& v : one.maps.values()) v = 1.0;
  const KSpaceMeasurement y1 = forward(x, m, &one, 0.0);
  const CgResult r1 = dc_project_multicoil(xt, y1, one, 0.5);
  CHECK(max_abs_diff(r1.x, dc_project_single(xt, forward(x, m, nullptr, 0.0), 0.5)) < 1e-8);

  // full mask, tiny lambda: recovers the image
  const CoilSensitivities s = simulate_sensitivities(4, 16, 16);
  const SamplingMask full = mask_of(MaskPattern::random2d, 1.0, 16);
  const CgResult rf = dc_project_multicoil(xt, forward(x, full, &s, 0.0), s, 1e-6);
  CHECK(max_abs_diff(rf.x, x) < 1e-4);
}

TEST_CASE("multi-coil projection matches dense normal equations") {
  for (int trial = 0; trial < 3; ++trial) {
    const ComplexImage x = random_image(8, 8, 120 + trial), xt = random_image(8, 8, 130 + trial);
    const CoilSensitivities s = random_sensitivities(2, 8, 8, 140 + trial);
    const SamplingMask m = mask_of(MaskPattern::random2d, 2.0, 8, 150 + trial, 0.0);
    RandomStream rs(160 + trial, 0);
    const KSpaceMeasurement y = forward(x, m, &s, 0.05, &rs);
    const Eigen::MatrixXcd E = dense_encoding(m, &s);
    for (double lambda : {0.1, 1.0, 10.0}) {
      const Eigen::MatrixXcd A = E.adjoint() * E + lambda * Eigen::MatrixXcd::Identity(64, 64);
      const Eigen::VectorXcd b = E.adjoint() * kept_data(y) + lambda * as_vector(xt);
      const Eigen::VectorXcd ref = A.partialPivLu().solve(b);
      const CgResult r = dc_project_multicoil(xt, y, s, lambda, 1e-12, 500);
      CHECK((as_vector(r.x) - ref).cwiseAbs().maxCoeff() < 1e-8);
      // reported residual is honest
      const Eigen::VectorXcd res = A * as_vector(r.x) - b;
      CHECK(res.norm() / b.norm() <= 1e-12 * 1.01);
      CHECK(r.relative_residual <= 1e-12);
    }
  }
}

TEST_CASE("normal operator matches the dense E^H E") {
  const CoilSensitivities s = random_sensitivities(3, 8, 8, 170);
  const SamplingMask m = mask_of(MaskPattern::random2d, 2.0, 8, 171, 0.0);
  const ComplexImage x = random_image(8, 8, 172);
  const Eigen::MatrixXcd E = dense_encoding(m, &s);
  const Eigen::VectorXcd ref = E.adjoint() * (E * as_vector(x));
  CHECK((as_vector(normal_operator(x, m, s)) - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("multi-coil projection reports non-convergence") {
  const CoilSensitivities s = simulate_sensitivities(4, 32, 32);
  const SamplingMask m = mask_of(MaskPattern::poisson_disk, 4.0, 32, 180);
  const KSpaceMeasurement y = forward(random_image(32, 32, 181), m, &s, 0.0);
  try {
    (void)dc_project_multicoil(random_image(32, 32, 182), y, s, 1e-3, 1e-14, 2);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 1e-14);
  }
  CHECK_THROWS_AS(dc_project_multicoil(random_image(32, 32, 182), y, s, 0.0), std::invalid_argument);
}

TEST_CASE("calibration-free projection is per-coil") {
  const CoilSensitivities s = simulate_sensitivities(4, 16, 16);
  const ComplexImage x = random_image(16, 16, 190);
  const SamplingMask m = mask_of(MaskPattern::pseudo_radial, 3.0, 16, 191);
  RandomStream rs(192, 0);
  const KSpaceMeasurement y = forward(x, m, &s, 0.01, &rs);
  const ComplexImage xt = random_image(16, 16, 193, 4);
  const ComplexImage p = dc_project_calibfree(xt, y, 0.3);
  for (std::size_t c = 0; c < 4; ++c) {
    KSpaceMeasurement yc{y.mask, y.data.coil_image(c), y.noise_std};
    CHECK(p.coil_image(c) == dc_project_single(xt.coil_image(c), yc, 0.3));
  }
  // full mask, lambda = 0: measured coil images
  const SamplingMask full = mask_of(MaskPattern::random2d, 1.0, 16);
  const KSpaceMeasurement yf = forward(x, full, &s, 0.0);
  CHECK(max_abs_diff(dc_project_calibfree(xt, yf, 0.0), zero_filled_per_coil(yf)) < 1e-12);
  // one coil degenerates to the single-coil projection
  const KSpaceMeasurement y1 = forward(x, m, nullptr, 0.0);
  CHECK(dc_project_calibfree(xt.coil_image(0), y1, 0.3) == dc_project_single(xt.coil_image(0), y1, 0.3));
  CHECK_THROWS_AS(dc_project_calibfree(random_image(16, 16, 1, 3), y, 0.3), DimensionError);
}
