#include "pancraft/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pancraft/error.hpp"

namespace pancraft {

template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha, const T* a, const T* b,
          T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  Eigen::Map<Mat> cm(c, m, n);
  const CMap am(a, trans_a ? k : m, trans_a ? m : k);
  const CMap bm(b, trans_b ? n : k, trans_b ? k : n);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (beta == T(0)) {
      cm.noalias() = alpha * (lhs * rhs);
    } else {
      cm.noalias() += alpha * (lhs * rhs);
    }
  };
  if (!trans_a && !trans_b) run(am, bm);
  else if (trans_a && !trans_b) run(am.transpose(), bm);
  else if (!trans_a && trans_b) run(am, bm.transpose());
  else run(am.transpose(), bm.transpose());
}

int64_t ConvGeometry::out_height() const { return (height + 2 * pad - kernel_h) / stride + 1; }
int64_t ConvGeometry::out_width() const { return (width + 2 * pad - kernel_w) / stride + 1; }

void ConvGeometry::validate() const {
  if (kernel_h % 2 == 0 || kernel_w % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd");
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: invalid stride/pad");
  const int64_t nh = height + 2 * pad - kernel_h;
  const int64_t nw = width + 2 * pad - kernel_w;
  // Output extents use floor division; the exact extent (n + 1) / stride must
  // still be integral, so same-padded stride-2 convolutions need even inputs.
  if (nh < 0 || nw < 0 || (nh + 1) % stride != 0 || (nw + 1) % stride != 0) {
    throw ShapeError("conv2d: non-integer output extent for input " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

namespace {

// Output columns [lo, hi) whose input column ox * stride - pad + j is in range.
std::pair<int64_t, int64_t> valid_span(const ConvGeometry& g, int64_t j, int64_t wo) {
  const int64_t off = j - g.pad;
  int64_t lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  int64_t hi = (g.width - 1 - off) >= 0 ? (g.width - 1 - off) / g.stride + 1 : 0;
  lo = std::min(lo, wo);
  hi = std::clamp(hi, lo, wo);
  return {lo, hi};
}

}  // namespace

template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* cols) {
  const int64_t ho = g.out_height(), wo = g.out_width();
  for (int64_t c = 0; c < g.in_channels; ++c) {
    const T* plane = image + c * g.height * g.width;
    for (int64_t i = 0; i < g.kernel_h; ++i) {
      for (int64_t j = 0; j < g.kernel_w; ++j) {
        T* row = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * ho * wo;
        const auto [lo, hi] = valid_span(g, j, wo);
        const int64_t x0 = j - g.pad;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t y = oy * g.stride - g.pad + i;
          T* dst = row + oy * wo;
          if (y < 0 || y >= g.height) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = plane + y * g.width;
          std::fill(dst, dst + lo, T(0));
          if (g.stride == 1) {
            std::copy(src + x0 + lo, src + x0 + hi, dst + lo);
          } else {
            for (int64_t ox = lo; ox < hi; ++ox) dst[ox] = src[x0 + ox * g.stride];
          }
          std::fill(dst + hi, dst + wo, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* image) {
  const int64_t ho = g.out_height(), wo = g.out_width();
  for (int64_t c = 0; c < g.in_channels; ++c) {
    T* plane = image + c * g.height * g.width;
    for (int64_t i = 0; i < g.kernel_h; ++i) {
      for (int64_t j = 0; j < g.kernel_w; ++j) {
        const T* row = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * ho * wo;
        const auto [lo, hi] = valid_span(g, j, wo);
        const int64_t x0 = j - g.pad;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t y = oy * g.stride - g.pad + i;
          if (y < 0 || y >= g.height) continue;
          T* dst = plane + y * g.width;
          const T* src = row + oy * wo;
          if (g.stride == 1) {
            T* d = dst + x0 + lo;
            const T* s = src + lo;
            for (int64_t k = 0; k < hi - lo; ++k) d[k] += s[k];
          } else {
            for (int64_t ox = lo; ox < hi; ++ox) dst[x0 + ox * g.stride] += src[ox];
          }
        }
      }
    }
  }
}

ResampleMethod parse_resample_method(std::string_view name) {
  if (name == "nearest") return ResampleMethod::Nearest;
  if (name == "bilinear") return ResampleMethod::Bilinear;
  if (name == "bicubic") return ResampleMethod::Bicubic;
  if (name == "avgpool" || name == "area") return ResampleMethod::AvgPool;
  throw ConfigError("unknown resample method '" + std::string(name) + "'");
}

namespace {

using Taps = std::vector<std::vector<std::pair<int64_t, double>>>;

double cubic_weight(double t) {
  constexpr double a = kBicubicA;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

// Per output index, the (source index, weight) pairs along one axis.
Taps axis_taps(int64_t in, int64_t out, ResampleMethod method) {
  Taps taps(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  auto clampi = [in](int64_t i) { return std::clamp<int64_t>(i, 0, in - 1); };
  for (int64_t o = 0; o < out; ++o) {
    auto& t = taps[static_cast<size_t>(o)];
    switch (method) {
      case ResampleMethod::Nearest: {
        t.emplace_back(clampi(static_cast<int64_t>(std::floor((o + 0.5) * scale))), 1.0);
        break;
      }
      case ResampleMethod::Bilinear: {
        const double src = (o + 0.5) * scale - 0.5;
        const double f = std::floor(src);
        const double frac = src - f;
        const auto i0 = static_cast<int64_t>(f);
        t.emplace_back(clampi(i0), 1.0 - frac);
        if (frac != 0.0) t.emplace_back(clampi(i0 + 1), frac);
        break;
      }
      case ResampleMethod::Bicubic: {
        const double src = (o + 0.5) * scale - 0.5;
        const double f = std::floor(src);
        const double frac = src - f;
        const auto i0 = static_cast<int64_t>(f);
        for (int64_t d = -1; d <= 2; ++d) {
          const double w = cubic_weight(frac - static_cast<double>(d));
          if (w != 0.0) t.emplace_back(clampi(i0 + d), w);
        }
        break;
      }
      case ResampleMethod::AvgPool: {
        const double lo = o * scale, hi = (o + 1) * scale;
        for (auto i = static_cast<int64_t>(std::floor(lo)); static_cast<double>(i) < hi; ++i) {
          const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
          if (overlap > 0.0) t.emplace_back(i, overlap / scale);
        }
        break;
      }
    }
  }
  return taps;
}

struct PlaneView {
  int64_t planes, height, width;
};

PlaneView planes_of(const Shape& s, const char* op) {
  if (s.rank() < 3) throw ShapeError(std::string(op) + ": expected rank 3 or 4, got " + s.str());
  return {s.numel() / (s.dim(-1) * s.dim(-2)), s.dim(-2), s.dim(-1)};
}

Shape with_spatial(const Shape& s, int64_t h, int64_t w) {
  std::vector<int64_t> dims = s.dims();
  dims[dims.size() - 2] = h;
  dims[dims.size() - 1] = w;
  return Shape(std::move(dims));
}

// Applies separable taps (rows then columns) to every plane, in double.
template <typename T>
Tensor<T> apply_taps(const Tensor<T>& x, const Taps& ty, const Taps& tx) {
  const auto pv = planes_of(x.shape(), "resample");
  const auto oh = static_cast<int64_t>(ty.size()), ow = static_cast<int64_t>(tx.size());
  Tensor<T> out(with_spatial(x.shape(), oh, ow));
  std::vector<double> tmp(static_cast<size_t>(pv.height * ow));
  for (int64_t p = 0; p < pv.planes; ++p) {
    const T* src = x.data() + p * pv.height * pv.width;
    for (int64_t y = 0; y < pv.height; ++y) {
      for (int64_t o = 0; o < ow; ++o) {
        double acc = 0.0;
        for (const auto& [i, w] : tx[static_cast<size_t>(o)]) acc += w * static_cast<double>(src[y * pv.width + i]);
        tmp[static_cast<size_t>(y * ow + o)] = acc;
      }
    }
    T* dst = out.data() + p * oh * ow;
    for (int64_t o = 0; o < oh; ++o) {
      for (int64_t xw = 0; xw < ow; ++xw) {
        double acc = 0.0;
        for (const auto& [i, w] : ty[static_cast<size_t>(o)]) acc += w * tmp[static_cast<size_t>(i * ow + xw)];
        dst[o * ow + xw] = static_cast<T>(acc);
      }
    }
  }
  return out;
}

int64_t scaled_extent(int64_t n, Ratio f) {
  if (f.num < 1 || f.den < 1) throw ShapeError("resample: factor must be positive");
  if ((n * f.num) % f.den != 0) {
    throw ShapeError("resample: extent " + std::to_string(n) + " not divisible for factor " +
                     std::to_string(f.num) + "/" + std::to_string(f.den));
  }
  return n * f.num / f.den;
}

// Half-sample symmetric reflection of an index into [0, n).
int64_t reflect(int64_t i, int64_t n) {
  const int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

template <typename T>
Tensor<T> resample(const Tensor<T>& x, Ratio factor, ResampleMethod method) {
  const auto pv = planes_of(x.shape(), "resample");
  const int64_t oh = scaled_extent(pv.height, factor);
  const int64_t ow = scaled_extent(pv.width, factor);
  return apply_taps(x, axis_taps(pv.height, oh, method), axis_taps(pv.width, ow, method));
}

template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& x, double sigma) {
  if (sigma <= 0.0) return x;
  const auto pv = planes_of(x.shape(), "gaussian_blur");
  const auto radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double total = 0.0;
  for (int64_t d = -radius; d <= radius; ++d) {
    const double w = std::exp(-0.5 * static_cast<double>(d * d) / (sigma * sigma));
    kernel[static_cast<size_t>(d + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;
  auto taps_for = [&](int64_t n) {
    Taps taps(static_cast<size_t>(n));
    for (int64_t o = 0; o < n; ++o) {
      for (int64_t d = -radius; d <= radius; ++d) {
        taps[static_cast<size_t>(o)].emplace_back(reflect(o + d, n), kernel[static_cast<size_t>(d + radius)]);
      }
    }
    return taps;
  };
  return apply_taps(x, taps_for(pv.height), taps_for(pv.width));
}

template <typename T>
Tensor<T> mtf_degrade(const Tensor<T>& x, int ratio, double sigma) {
  return avg_pool(gaussian_blur(x, sigma), ratio);
}

template <typename T>
Tensor<T> replicate_channels(const Tensor<T>& x, int64_t n) {
  const int r = x.rank();
  if (r < 3 || x.dim(-3) != 1) throw ShapeError("replicate_channels: expected a single channel, got " + x.shape().str());
  std::vector<int64_t> dims = x.shape().dims();
  dims[static_cast<size_t>(r - 3)] = n;
  Tensor<T> out{Shape(dims)};
  const int64_t plane = x.dim(-1) * x.dim(-2);
  const int64_t batch = r == 4 ? x.dim(0) : 1;
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t c = 0; c < n; ++c) {
      std::copy_n(x.data() + b * plane, plane, out.data() + (b * n + c) * plane);
    }
  }
  return out;
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  Tensor<T> out = x;
  for (auto& v : out.storage()) v = std::clamp(v, lo, hi);
  return out;
}

#define PANCRAFT_INSTANTIATE(T)                                                                     \
  template void gemm<T>(bool, bool, int64_t, int64_t, int64_t, T, const T*, const T*, T, T*);      \
  template void im2col<T>(const ConvGeometry&, const T*, T*);                                      \
  template void col2im<T>(const ConvGeometry&, const T*, T*);                                      \
  template Tensor<T> resample<T>(const Tensor<T>&, Ratio, ResampleMethod);                         \
  template Tensor<T> gaussian_blur<T>(const Tensor<T>&, double);                                   \
  template Tensor<T> mtf_degrade<T>(const Tensor<T>&, int, double);                                \
  template Tensor<T> replicate_channels<T>(const Tensor<T>&, int64_t);                             \
  template Tensor<T> clamp<T>(const Tensor<T>&, T, T);

PANCRAFT_INSTANTIATE(float)
PANCRAFT_INSTANTIATE(double)
#undef PANCRAFT_INSTANTIATE

}  // namespace pancraft
