#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

using Grid = std::vector<std::vector<double>>;
using CGrid = std::vector<std::vector<std::complex<double>>>;

// Separable O(N^3) discrete Fourier transform; sign -1 forward, +1 inverse
// (unnormalized).
inline CGrid dft2(const CGrid& in, int sign) {
  const size_t H = in.size(), W = in[0].size();
  CGrid rows(H, std::vector<std::complex<double>>(W));
  for (size_t y = 0; y < H; ++y) {
    for (size_t k = 0; k < W; ++k) {
      std::complex<double> acc = 0;
      for (size_t x = 0; x < W; ++x) acc += in[y][x] * std::polar(1.0, sign * 2 * std::numbers::pi * k * x / W);
      rows[y][k] = acc;
    }
  }
  CGrid out(H, std::vector<std::complex<double>>(W));
  for (size_t k = 0; k < W; ++k) {
    for (size_t l = 0; l < H; ++l) {
      std::complex<double> acc = 0;
      for (size_t y = 0; y < H; ++y) acc += rows[y][k] * std::polar(1.0, sign * 2 * std::numbers::pi * l * y / H);
      out[l][k] = acc;
    }
  }
  return out;
}

// Translation (dy, dx) such that moved(y, x) ~ base(y - dy, x - dx). Both
// images are mean-removed and Hann-windowed; the integer peak of the
// normalized cross-power spectrum is refined with a parabola per axis.
inline std::pair<double, double> phase_correlation_shift(const Grid& moved, const Grid& base) {
  const size_t H = base.size(), W = base[0].size();
  auto prep = [&](const Grid& g) {
    double m = 0.0;
    for (const auto& r : g)
      for (double v : r) m += v;
    m /= static_cast<double>(H * W);
    CGrid c(H, std::vector<std::complex<double>>(W));
    for (size_t y = 0; y < H; ++y) {
      for (size_t x = 0; x < W; ++x) {
        const double wy = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * y / (H - 1));
        const double wx = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * x / (W - 1));
        c[y][x] = (g[y][x] - m) * wy * wx;
      }
    }
    return dft2(c, -1);
  };
  const CGrid A = prep(moved), B = prep(base);
  CGrid R(H, std::vector<std::complex<double>>(W));
  for (size_t y = 0; y < H; ++y) {
    for (size_t x = 0; x < W; ++x) {
      const auto p = A[y][x] * std::conj(B[y][x]);
      R[y][x] = std::abs(p) > 1e-15 ? p / std::abs(p) : 0.0;
    }
  }
  const CGrid r = dft2(R, +1);
  size_t py = 0, px = 0;
  for (size_t y = 0; y < H; ++y)
    for (size_t x = 0; x < W; ++x)
      if (r[y][x].real() > r[py][px].real()) py = y, px = x;
  auto val = [&](long y, long x) { return r[(y + H) % H][(x + W) % W].real(); };
  auto refine = [](double a, double b, double c) {
    const double den = a - 2 * b + c;
    return den == 0.0 ? 0.0 : 0.5 * (a - c) / den;
  };
  const long iy = static_cast<long>(py), ix = static_cast<long>(px);
  double dy = iy + refine(val(iy - 1, ix), val(iy, ix), val(iy + 1, ix));
  double dx = ix + refine(val(iy, ix - 1), val(iy, ix), val(iy, ix + 1));
  if (dy > H / 2.0) dy -= static_cast<double>(H);
  if (dx > W / 2.0) dx -= static_cast<double>(W);
  return {dy, dx};
}

}  // namespace oracle
