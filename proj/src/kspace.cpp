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
#include "ebmrec/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ebmrec {

namespace {

long freq(std::size_t i, std::size_t n) { return i < n / 2 ? long(i) : long(i) - long(n); }

std::size_t index_of_freq(long f, std::size_t n) {
  return f >= 0 ? std::size_t(f) : std::size_t(long(n) + f);
}

// Fisher-Yates prefix: the first k entries of v become a uniform random
// k-subset.
void shuffle_prefix(std::vector<std::size_t>& v, std::size_t k, RandomStream& rs) {
  k = std::min(k, v.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(v[i], v[i + rs.index(v.size() - i)]);
}

void mark_center_disk(SamplingMask& m, double center_fraction) {
  if (center_fraction <= 0.0) return;
  const double r2 = center_fraction * double(m.height * m.width) / std::numbers::pi;
  for (std::size_t r = 0; r < m.height; ++r)
    for (std::size_t c = 0; c < m.width; ++c) {
      const double fy = double(freq(r, m.height)), fx = double(freq(c, m.width));
      if (fy * fy + fx * fx <= r2) m.keep[r * m.width + c] = 1;
    }
}

std::size_t target_count(std::size_t total, double R) {
  return std::max<std::size_t>(1, std::size_t(std::llround(double(total) / R)));
}

void make_cartesian(SamplingMask& m, double R, double cf, RandomStream& rs) {
  const std::size_t h = m.height;
  const std::size_t n_rows = std::max<std::size_t>(1, std::size_t(std::llround(double(h) / R)));
  const std::size_t n_center = std::min(n_rows, std::size_t(std::llround(cf * double(h))));
  std::vector<std::size_t> rows(h);
  std::iota(rows.begin(), rows.end(), 0);
  // central rows: frequencies -n/2 .. n/2-1
  std::vector<std::size_t> center, rest;
  const long lo = -long(n_center) / 2 - long(n_center % 2), hi = lo + long(n_center);
  for (auto r : rows) {
    const long f = freq(r, h);
    (f >= lo && f < hi ? center : rest).push_back(r);
  }
  shuffle_prefix(rest, n_rows - center.size(), rs);
  auto keep_row = [&](std::size_t r) {
    std::fill_n(m.keep.begin() + long(r * m.width), m.width, std::uint8_t{1});
  };
  for (auto r : center) keep_row(r);
  for (std::size_t i = 0; i < n_rows - center.size(); ++i) keep_row(rest[i]);
}

void rasterize_spoke(SamplingMask& m, double theta) {
  const double half_h = double(m.height) / 2.0, half_w = double(m.width) / 2.0;
  const double L = std::hypot(half_h, half_w);
  const double sy = std::sin(theta), sx = std::cos(theta);
  for (double t = -L; t <= L; t += 0.5) {
    const long fy = std::lround(t * sy), fx = std::lround(t * sx);
    if (fy < -long(m.height) / 2 || fy >= long(m.height) / 2) continue;
    if (fx < -long(m.width) / 2 || fx >= long(m.width) / 2) continue;
    m.keep[index_of_freq(fy, m.height) * m.width + index_of_freq(fx, m.width)] = 1;
  }
}

void make_radial(SamplingMask& m, double R, double cf, RandomStream& rs) {
  const std::size_t target = target_count(m.keep.size(), R);
  const double golden = std::numbers::pi / std::numbers::phi;  // 111.25 degrees
  const double theta0 = rs.uniform(0.0, std::numbers::pi);
  mark_center_disk(m, cf);
  SamplingMask prev = m;
  for (std::size_t k = 0; m.kept_count() < target; ++k) {
    prev = m;
    rasterize_spoke(m, theta0 + double(k) * golden);
    if (k > 100000) break;
  }
  const auto diff = [&](const SamplingMask& s) {
    return std::abs(double(s.kept_count()) - double(target));
  };
  if (diff(prev) < diff(m)) m = std::move(prev);
}

void make_random2d(SamplingMask& m, double R, double cf, RandomStream& rs) {
  const std::size_t target = target_count(m.keep.size(), R);
  mark_center_disk(m, cf);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < m.keep.size(); ++i)
    if (!m.keep[i]) free.push_back(i);
  const std::size_t have = m.kept_count();
  const std::size_t need = target > have ? target - have : 0;
  shuffle_prefix(free, need, rs);
  for (std::size_t i = 0; i < std::min(need, free.size()); ++i) m.keep[free[i]] = 1;
}

// Greedy dart throwing over a fixed candidate order with minimum distance r.
std::vector<std::uint8_t> throw_darts(const SamplingMask& base,
                                      const std::vector<std::size_t>& order, double r) {
  std::vector<std::uint8_t> darts(base.keep.size(), 0);
  const long h = long(base.height), w = long(base.width);
  const long reach = long(std::ceil(r));
  const double r2 = r * r;
  for (auto idx : order) {
    const long y = long(idx) / w, x = long(idx) % w;
    const long fy = freq(std::size_t(y), base.height), fx = freq(std::size_t(x), base.width);
    bool ok = true;
    for (long dy = -reach; dy <= reach && ok; ++dy) {
      const long ny = fy + dy;
      if (ny < -h / 2 || ny >= h / 2) continue;
      for (long dx = -reach; dx <= reach; ++dx) {
        const long nx = fx + dx;
        if (nx < -w / 2 || nx >= w / 2) continue;
        if (double(dy * dy + dx * dx) >= r2) continue;
        if (darts[index_of_freq(ny, base.height) * base.width + index_of_freq(nx, base.width)]) {
          ok = false;
          break;
        }
      }
    }
    if (ok) darts[std::size_t(idx)] = 1;
  }
  return darts;
}

void make_poisson(SamplingMask& m, double R, double cf, RandomStream& rs) {
  const std::size_t target = target_count(m.keep.size(), R);
  mark_center_disk(m, cf);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < m.keep.size(); ++i)
    if (!m.keep[i]) order.push_back(i);
  shuffle_prefix(order, order.size(), rs);

  auto count_with = [&](const std::vector<std::uint8_t>& darts) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < darts.size(); ++i) n += (darts[i] || m.keep[i]) ? 1 : 0;
    return n;
  };
  // Kept count falls as r grows, but only through a few discrete fill levels
  // on a pixel grid. Bisect for the sparsest pattern that still reaches the
  // target, then drop the most recently placed darts down to it. Removing
  // darts preserves the minimum-distance property.
  double lo = 0.5, hi = double(std::max(m.height, m.width));
  std::vector<std::uint8_t> best = throw_darts(m, order, lo);
  for (int it = 0; it < 40; ++it) {
    const double r = 0.5 * (lo + hi);
    auto darts = throw_darts(m, order, r);
    const std::size_t n = count_with(darts);
    if (n >= target) {
      lo = r;
      best = std::move(darts);
      if (n == target) break;
    } else {
      hi = r;
    }
  }
  std::size_t excess = count_with(best) > target ? count_with(best) - target : 0;
  for (auto it = order.rbegin(); it != order.rend() && excess > 0; ++it)
    if (best[*it]) {
      best[*it] = 0;
      --excess;
    }
  for (std::size_t i = 0; i < m.keep.size(); ++i)
    if (best[i]) m.keep[i] = 1;
}

void require_single(const ComplexImage& x, const char* what) {
  if (x.coils() != 1) throw DimensionError(std::string(what) + " expects a single-coil image");
}

void require_grid(const ComplexImage& x, const SamplingMask& m) {
  if (x.height() != m.height || x.width() != m.width)
    throw DimensionError("image and mask dimensions differ");
}

void apply_mask(ComplexImage& k, const SamplingMask& m) {
  for (std::size_t c = 0; c < k.coils(); ++c) {
    auto plane = k.coil(c);
    for (std::size_t i = 0; i < plane.size(); ++i)
      if (!m.keep[i]) plane[i] = 0.0;
  }
}

ComplexImage adjoint(const KSpaceMeasurement& y, const CoilSensitivities& coils) {
  ComplexImage out(y.data.height(), y.data.width(), 1);
  ComplexImage masked = y.data;
  apply_mask(masked, y.mask);
  const ComplexImage per_coil = ifft2(masked);
  for (std::size_t c = 0; c < coils.count(); ++c) {
    auto s = coils.maps.coil(c);
    auto img = per_coil.coil(c);
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += std::conj(s[i]) * img[i];
  }
  return out;
}

cdouble dot(const ComplexImage& a, const ComplexImage& b) {
  cdouble s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += std::conj(av[i]) * bv[i];
  return s;
}

void check_coils(const KSpaceMeasurement& y, const CoilSensitivities& coils) {
  if (coils.count() != y.data.coils())
    throw DimensionError("measurement coil count differs from sensitivity map count");
  if (coils.maps.height() != y.data.height() || coils.maps.width() != y.data.width())
    throw DimensionError("sensitivity maps and measurement differ in size");
}

}  // namespace

std::string to_string(MaskPattern p) {
  switch (p) {
    case MaskPattern::cartesian1d: return "cartesian1d";
    case MaskPattern::pseudo_radial: return "pseudo_radial";
    case MaskPattern::random2d: return "random2d";
    case MaskPattern::poisson_disk: return "poisson_disk";
  }
  return "unknown";
}

MaskPattern parse_mask_pattern(const std::string& s) {
  for (auto p : {MaskPattern::cartesian1d, MaskPattern::pseudo_radial, MaskPattern::random2d,
                 MaskPattern::poisson_disk})
    if (to_string(p) == s) return p;
  if (s == "radial") return MaskPattern::pseudo_radial;
  if (s == "cartesian") return MaskPattern::cartesian1d;
  if (s == "poisson") return MaskPattern::poisson_disk;
  throw std::invalid_argument("unknown mask pattern '" + s + "'");
}

std::size_t SamplingMask::kept_count() const {
  return std::size_t(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

double SamplingMask::kept_fraction() const {
  return keep.empty() ? 0.0 : double(kept_count()) / double(keep.size());
}

SamplingMask make_mask(MaskPattern pattern, double R, std::size_t height, std::size_t width,
                       double center_fraction, RandomStream& stream) {
  if (!(R >= 1.0) || !std::isfinite(R)) throw std::invalid_argument("acceleration R must be >= 1");
  if (!(center_fraction >= 0.0 && center_fraction < 1.0))
    throw std::invalid_argument("center_fraction must lie in [0, 1)");
  if (height < 4 || width < 4) throw DimensionError("mask dimensions must be >= 4");
  SamplingMask m;
  m.height = height;
  m.width = width;
  m.pattern = pattern;
  m.acceleration = R;
  m.keep.assign(height * width, 0);
  if (R == 1.0) {
    std::fill(m.keep.begin(), m.keep.end(), std::uint8_t{1});
    return m;
  }
  if (center_fraction > 1.0 / R)
    throw std::invalid_argument("center_fraction exceeds 1/R; the mask is infeasible");
  switch (pattern) {
    case MaskPattern::cartesian1d: make_cartesian(m, R, center_fraction, stream); break;
    case MaskPattern::pseudo_radial: make_radial(m, R, center_fraction, stream); break;
    case MaskPattern::random2d: make_random2d(m, R, center_fraction, stream); break;
    case MaskPattern::poisson_disk: make_poisson(m, R, center_fraction, stream); break;
  }
  if (m.kept_count() == 0) m.keep[0] = 1;
  return m;
}

KSpaceMeasurement forward(const ComplexImage& x, const SamplingMask& mask,
                          const CoilSensitivities* coils, double noise_std, RandomStream* stream) {
  require_single(x, "forward");
  require_grid(x, mask);
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
  if (noise_std > 0.0 && !stream) throw std::invalid_argument("noisy forward needs a stream");
  const std::size_t n_coils = coils ? coils->count() : 1;
  if (coils && (coils->maps.height() != x.height() || coils->maps.width() != x.width()))
    throw DimensionError("sensitivity maps and image differ in size");

  ComplexImage weighted(x.height(), x.width(), n_coils);
  for (std::size_t c = 0; c < n_coils; ++c) {
    auto dst = weighted.coil(c);
    auto src = x.coil(0);
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = coils ? coils->maps.coil(c)[i] * src[i] : src[i];
  }
  KSpaceMeasurement y;
  y.mask = mask;
  y.noise_std = noise_std;
  y.data = fft2(weighted);
  apply_mask(y.data, mask);
  if (noise_std > 0.0) {
    const double s = noise_std / std::sqrt(2.0);
    for (std::size_t c = 0; c < n_coils; ++c) {
      auto plane = y.data.coil(c);
      for (std::size_t i = 0; i < plane.size(); ++i)
        if (mask.keep[i]) {
          const double re = s * stream->normal();
          const double im = s * stream->normal();
          plane[i] += cdouble(re, im);
        }
    }
  }
  return y;
}

ComplexImage zero_filled_per_coil(const KSpaceMeasurement& y) {
  require_grid(y.data, y.mask);
  ComplexImage masked = y.data;
  apply_mask(masked, y.mask);
  return ifft2(masked);
}

ComplexImage rss_combine(const ComplexImage& per_coil) {
  ComplexImage out(per_coil.height(), per_coil.width(), 1);
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    double ss = 0.0;
    for (std::size_t c = 0; c < per_coil.coils(); ++c) ss += std::norm(per_coil.coil(c)[i]);
    const double phase = std::arg(per_coil.coil(0)[i]);
    o[i] = std::polar(std::sqrt(ss), phase);
  }
  return out;
}

ComplexImage zero_filled(const KSpaceMeasurement& y, const CoilSensitivities* coils) {
  if (coils) {
    check_coils(y, *coils);
    return adjoint(y, *coils);
  }
  ComplexImage per_coil = zero_filled_per_coil(y);
  if (per_coil.coils() == 1) return per_coil;
  return rss_combine(per_coil);
}

ComplexImage dc_project_single(const ComplexImage& x_tilde, const KSpaceMeasurement& y,
                               double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be finite and >= 0");
  require_single(x_tilde, "dc_project_single");
  require_single(y.data, "dc_project_single measurement");
  require_grid(x_tilde, y.mask);
  require_grid(y.data, y.mask);
  ComplexImage k = fft2(x_tilde);
  auto kv = k.values();
  auto yv = y.data.values();
  const double denom = 1.0 + lambda;
  for (std::size_t i = 0; i < kv.size(); ++i)
    if (y.mask.keep[i]) kv[i] = lambda == 0.0 ? yv[i] : (yv[i] + lambda * kv[i]) / denom;
  return ifft2(k);
}

ComplexImage normal_operator(const ComplexImage& x, const SamplingMask& mask,
                             const CoilSensitivities& coils) {
  require_single(x, "normal_operator");
  require_grid(x, mask);
  ComplexImage weighted(x.height(), x.width(), coils.count());
  for (std::size_t c = 0; c < coils.count(); ++c) {
    auto dst = weighted.coil(c);
    auto s = coils.maps.coil(c);
    auto src = x.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = s[i] * src[i];
  }
  ComplexImage k = fft2(weighted);
  apply_mask(k, mask);
  const ComplexImage back = ifft2(k);
  ComplexImage out(x.height(), x.width(), 1);
  auto o = out.values();
  for (std::size_t c = 0; c < coils.count(); ++c) {
    auto s = coils.maps.coil(c);
    auto b = back.coil(c);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += std::conj(s[i]) * b[i];
  }
  return out;
}

CgResult dc_project_multicoil(const ComplexImage& x_tilde, const KSpaceMeasurement& y,
                              const CoilSensitivities& coils, double lambda, double tol,
                              std::size_t max_iter) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("multi-coil projection needs a finite lambda > 0");
  require_single(x_tilde, "dc_project_multicoil");
  require_grid(x_tilde, y.mask);
  check_coils(y, coils);

  auto apply_A = [&](const ComplexImage& v) {
    ComplexImage out = normal_operator(v, y.mask, coils);
    out += cdouble(lambda) * v;
    return out;
  };
  ComplexImage b = adjoint(y, coils);
  b += cdouble(lambda) * x_tilde;
  const double b_norm = std::sqrt(b.squared_norm());
  CgResult res{x_tilde, 0.0, 0};
  if (b_norm == 0.0) {
    res.x = ComplexImage(x_tilde.height(), x_tilde.width(), 1);
    return res;
  }
  auto true_residual = [&](const ComplexImage& x) {
    ComplexImage r = b - apply_A(x);
    return r;
  };

  ComplexImage r = true_residual(res.x);
  double rel = std::sqrt(r.squared_norm()) / b_norm;
  while (rel > tol && res.iterations < max_iter) {
    // (re)start CG from the current iterate
    ComplexImage p = r;
    double rr = r.squared_norm();
    while (res.iterations < max_iter) {
      const ComplexImage Ap = apply_A(p);
      const double pAp = dot(p, Ap).real();
      if (!(pAp > 0.0)) break;
      const double alpha = rr / pAp;
      res.x += cdouble(alpha) * p;
      r -= cdouble(alpha) * Ap;
      ++res.iterations;
      const double rr_new = r.squared_norm();
      if (std::sqrt(rr_new) / b_norm <= tol) break;
      p = r + cdouble(rr_new / rr) * p;
      rr = rr_new;
    }
    r = true_residual(res.x);
    const double new_rel = std::sqrt(r.squared_norm()) / b_norm;
    if (new_rel >= rel && new_rel > tol) {
      rel = new_rel;
      break;  // stagnated
    }
    rel = new_rel;
  }
  res.relative_residual = rel;
  if (rel > tol)
    throw ConvergenceError("conjugate gradients did not reach tol " + std::to_string(tol) +
                               " (relative residual " + std::to_string(rel) + ")",
                           rel);
  return res;
}

ComplexImage dc_project_calibfree(const ComplexImage& x_tilde_per_coil,
                                  const KSpaceMeasurement& y, double lambda) {
  if (x_tilde_per_coil.coils() != y.data.coils())
    throw DimensionError("per-coil estimate and measurement differ in coil count");
  ComplexImage out(x_tilde_per_coil.height(), x_tilde_per_coil.width(), x_tilde_per_coil.coils());
  for (std::size_t c = 0; c < out.coils(); ++c) {
    KSpaceMeasurement yc{y.mask, y.data.coil_image(c), y.noise_std};
    out.set_coil(c, dc_project_single(x_tilde_per_coil.coil_image(c), yc, lambda));
  }
  return out;
}

}  // namespace ebmrec
