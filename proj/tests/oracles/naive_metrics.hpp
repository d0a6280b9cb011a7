#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pancraft/tensor.hpp"

// Straightforward reference implementations of the image quality indices,
// written from their textbook definitions on nested vectors.
namespace oracle {

using Plane = std::vector<std::vector<double>>;
using Cube = std::vector<Plane>;

template <typename T>
Cube to_cube(const pancraft::Tensor<T>& t) {
  Cube c(static_cast<size_t>(t.dim(0)), Plane(static_cast<size_t>(t.dim(1)), std::vector<double>(t.dim(2))));
  for (int64_t b = 0; b < t.dim(0); ++b)
    for (int64_t y = 0; y < t.dim(1); ++y)
      for (int64_t x = 0; x < t.dim(2); ++x) c[b][y][x] = static_cast<double>(t.at(b, y, x));
  return c;
}

inline double plane_mean(const Plane& p) {
  double s = 0.0;
  size_t n = 0;
  for (const auto& row : p)
    for (double v : row) s += v, ++n;
  return s / static_cast<double>(n);
}

inline double naive_ergas(const Cube& f, const Cube& g, int ratio) {
  double acc = 0.0;
  for (size_t b = 0; b < g.size(); ++b) {
    double se = 0.0;
    size_t n = 0;
    for (size_t y = 0; y < g[b].size(); ++y)
      for (size_t x = 0; x < g[b][y].size(); ++x) se += std::pow(f[b][y][x] - g[b][y][x], 2), ++n;
    const double rmse = std::sqrt(se / static_cast<double>(n));
    acc += std::pow(rmse / plane_mean(g[b]), 2);
  }
  return 100.0 / ratio * std::sqrt(acc / static_cast<double>(g.size()));
}

inline double naive_sam_degrees(const Cube& f, const Cube& g) {
  double acc = 0.0;
  int n = 0;
  for (size_t y = 0; y < g[0].size(); ++y) {
    for (size_t x = 0; x < g[0][0].size(); ++x) {
      double dot = 0.0, a2 = 0.0, b2 = 0.0;
      for (size_t b = 0; b < g.size(); ++b) {
        dot += f[b][y][x] * g[b][y][x];
        a2 += f[b][y][x] * f[b][y][x];
        b2 += g[b][y][x] * g[b][y][x];
      }
      if (a2 == 0.0 || b2 == 0.0) continue;
      acc += std::acos(std::clamp(dot / (std::sqrt(a2) * std::sqrt(b2)), -1.0, 1.0));
      ++n;
    }
  }
  return acc / n * 180.0 / std::numbers::pi;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Correlation of the 4-neighbour Laplacian responses on interior pixels.
inline double naive_scc(const Cube& f, const Cube& g) {
  auto lap = [](const Plane& p) {
    std::vector<double> out;
    for (size_t y = 1; y + 1 < p.size(); ++y)
      for (size_t x = 1; x + 1 < p[0].size(); ++x)
        out.push_back(4 * p[y][x] - p[y - 1][x] - p[y + 1][x] - p[y][x - 1] - p[y][x + 1]);
    return out;
  };
  double acc = 0.0;
  for (size_t b = 0; b < g.size(); ++b) acc += pearson(lap(f[b]), lap(g[b]));
  return acc / static_cast<double>(g.size());
}

inline double naive_psnr(const Cube& f, const Cube& g) {
  double acc = 0.0;
  for (size_t b = 0; b < g.size(); ++b) {
    double se = 0.0;
    size_t n = 0;
    for (size_t y = 0; y < g[b].size(); ++y)
      for (size_t x = 0; x < g[b][y].size(); ++x) se += std::pow(f[b][y][x] - g[b][y][x], 2), ++n;
    const double mse = std::max(se / static_cast<double>(n), 1e-12);
    acc += std::min(99.0, 10.0 * std::log10(1.0 / mse));
  }
  return acc / static_cast<double>(g.size());
}

// Gaussian-weighted SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 1) averaged
// over all valid window positions and bands.
inline double naive_ssim(const Cube& f, const Cube& g) {
  constexpr int n = 11;
  double w[n][n], tot = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) tot += (w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5)));
  for (auto& row : w)
    for (double& v : row) v /= tot;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0.0;
  for (size_t b = 0; b < g.size(); ++b) {
    const size_t H = g[b].size(), W = g[b][0].size();
    double s = 0.0;
    int count = 0;
    for (size_t y = 0; y + n <= H; ++y) {
      for (size_t x = 0; x + n <= W; ++x) {
        double mu_a = 0, mu_b = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) mu_a += w[i][j] * f[b][y + i][x + j], mu_b += w[i][j] * g[b][y + i][x + j];
        double va = 0, vb = 0, cab = 0;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const double da = f[b][y + i][x + j] - mu_a, db = g[b][y + i][x + j] - mu_b;
            va += w[i][j] * da * da;
            vb += w[i][j] * db * db;
            cab += w[i][j] * da * db;
          }
        }
        s += (2 * mu_a * mu_b + c1) * (2 * cab + c2) / ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
        ++count;
      }
    }
    acc += s / count;
  }
  return acc / static_cast<double>(g.size());
}

// Hypercomplex numbers of dimension 1, 2, 4 or 8: reals, complex numbers,
// Hamilton quaternions and octonions from the Cayley-Dickson doubling
// (a, b)(c, d) = (ac - conj(d) b, d a + b conj(c)) over quaternions.
using Hyper = std::vector<double>;

inline Hyper hconj(Hyper v) {
  for (size_t i = 1; i < v.size(); ++i) v[i] = -v[i];
  return v;
}

inline Hyper quat_mul(const Hyper& p, const Hyper& q) {
  return {p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3], p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
          p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1], p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]};
}

inline Hyper hmul(const Hyper& x, const Hyper& y) {
  switch (x.size()) {
    case 1:
      return {x[0] * y[0]};
    case 2:
      return {x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0]};
    case 4:
      return quat_mul(x, y);
    case 8: {
      const Hyper a(x.begin(), x.begin() + 4), b(x.begin() + 4, x.end());
      const Hyper c(y.begin(), y.begin() + 4), d(y.begin() + 4, y.end());
      const Hyper ac = quat_mul(a, c), db = quat_mul(hconj(d), b);
      const Hyper da = quat_mul(d, a), bc = quat_mul(b, hconj(c));
      return {ac[0] - db[0], ac[1] - db[1], ac[2] - db[2], ac[3] - db[3],
              da[0] + bc[0], da[1] + bc[1], da[2] + bc[2], da[3] + bc[3]};
    }
    default:
      throw std::invalid_argument("hypercomplex dimension must be 1, 2, 4 or 8");
  }
}

inline double hnorm2(const Hyper& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Q2^n of one tile: |cov(z, w)| / (sigma_z sigma_w) * 2 sigma_z sigma_w / (sigma_z^2 + sigma_w^2)
// * 2 |mu_z| |mu_w| / (|mu_z|^2 + |mu_w|^2), both images first normalized
// per band by the reference tile's mean and (unbiased) standard deviation
// and shifted by +1.
inline double q2n_tile(const std::vector<Hyper>& ref_px, const std::vector<Hyper>& fus_px) {
  const size_t P = ref_px.size(), n = ref_px[0].size();
  Hyper mu_z(n, 0.0), mu_w(n, 0.0);
  for (size_t p = 0; p < P; ++p)
    for (size_t i = 0; i < n; ++i) mu_z[i] += ref_px[p][i] / P, mu_w[i] += fus_px[p][i] / P;
  Hyper cov(n, 0.0);
  double var_z = 0.0, var_w = 0.0;
  for (size_t p = 0; p < P; ++p) {
    Hyper dz(n), dw(n);
    for (size_t i = 0; i < n; ++i) dz[i] = ref_px[p][i] - mu_z[i], dw[i] = fus_px[p][i] - mu_w[i];
    const Hyper prod = hmul(dz, hconj(dw));
    for (size_t i = 0; i < n; ++i) cov[i] += prod[i] / (P - 1.0);
    var_z += hnorm2(dz) / (P - 1.0);
    var_w += hnorm2(dw) / (P - 1.0);
  }
  const double m2z = hnorm2(mu_z), m2w = hnorm2(mu_w);
  return 4.0 * std::sqrt(hnorm2(cov)) * std::sqrt(m2z) * std::sqrt(m2w) / ((var_z + var_w) * (m2z + m2w));
}

inline double naive_q2n(const Cube& f, const Cube& g, int block = 32) {
  const size_t B = g.size(), H = g[0].size(), W = g[0][0].size();
  size_t n = 1;
  while (n < B) n *= 2;
  auto starts = [&](size_t extent) {
    std::vector<std::array<size_t, 2>> s;
    if (extent <= static_cast<size_t>(block)) return std::vector<std::array<size_t, 2>>{{0, extent}};
    for (size_t o = 0; o + block <= extent; o += block) s.push_back({o, static_cast<size_t>(block)});
    return s;
  };
  double total = 0.0;
  int tiles = 0;
  for (auto [y0, bh] : starts(H)) {
    for (auto [x0, bw] : starts(W)) {
      std::vector<Hyper> z(bh * bw, Hyper(n, 0.0)), w(bh * bw, Hyper(n, 0.0));
      for (size_t b = 0; b < B; ++b) {
        double m = 0.0, ss = 0.0;
        for (size_t y = y0; y < y0 + bh; ++y)
          for (size_t x = x0; x < x0 + bw; ++x) m += g[b][y][x];
        m /= static_cast<double>(bh * bw);
        for (size_t y = y0; y < y0 + bh; ++y)
          for (size_t x = x0; x < x0 + bw; ++x) ss += (g[b][y][x] - m) * (g[b][y][x] - m);
        const double sd = std::sqrt(ss / (bh * bw - 1.0));
        size_t p = 0;
        for (size_t y = y0; y < y0 + bh; ++y) {
          for (size_t x = x0; x < x0 + bw; ++x, ++p) {
            z[p][b] = (g[b][y][x] - m) / sd + 1.0;
            w[p][b] = (f[b][y][x] - m) / sd + 1.0;
          }
        }
      }
      total += q2n_tile(z, w);
      ++tiles;
    }
  }
  return total / tiles;
}

// Universal image quality index 4 s_ab m_a m_b / ((s_a^2 + s_b^2)(m_a^2 + m_b^2))
// on raw values, averaged over the same tiling as q2n.
inline double naive_uiqi(const Plane& a, const Plane& b, int block = 32) {
  const size_t H = a.size(), W = a[0].size();
  auto spans = [&](size_t extent) {
    std::vector<std::array<size_t, 2>> s;
    if (extent <= static_cast<size_t>(block)) return std::vector<std::array<size_t, 2>>{{0, extent}};
    for (size_t o = 0; o + block <= extent; o += block) s.push_back({o, static_cast<size_t>(block)});
    return s;
  };
  double total = 0.0;
  int tiles = 0;
  for (auto [y0, bh] : spans(H)) {
    for (auto [x0, bw] : spans(W)) {
      std::vector<double> va, vb;
      for (size_t y = y0; y < y0 + bh; ++y)
        for (size_t x = x0; x < x0 + bw; ++x) va.push_back(a[y][x]), vb.push_back(b[y][x]);
      const double n = static_cast<double>(va.size());
      double ma = 0, mb = 0;
      for (size_t i = 0; i < va.size(); ++i) ma += va[i] / n, mb += vb[i] / n;
      double saa = 0, sbb = 0, sab = 0;
      for (size_t i = 0; i < va.size(); ++i) {
        saa += (va[i] - ma) * (va[i] - ma) / (n - 1);
        sbb += (vb[i] - mb) * (vb[i] - mb) / (n - 1);
        sab += (va[i] - ma) * (vb[i] - mb) / (n - 1);
      }
      total += 4 * sab * ma * mb / ((saa + sbb) * (ma * ma + mb * mb));
      ++tiles;
    }
  }
  return total / tiles;
}

}  // namespace oracle
