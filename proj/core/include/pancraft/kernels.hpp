#pragma once

#include <cstdint>
#include <string_view>

#include "pancraft/tensor.hpp"

namespace pancraft {

/// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C, where op(A) is
/// m x k and op(B) is k x n. beta must be 0 or 1.
template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha, const T* a, const T* b,
          T beta, T* c);

struct ConvGeometry {
  int64_t in_channels, height, width;
  int64_t kernel_h, kernel_w;
  int64_t stride, pad;

  int64_t out_height() const;
  int64_t out_width() const;
  int64_t patch_size() const { return in_channels * kernel_h * kernel_w; }
  /// Throws ShapeError for even kernels or a non-integral output extent.
  void validate() const;
};

/// Unfolds one image [Cin, H, W] into columns [Cin*kh*kw, Ho*Wo]. Padding is zero.
template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* cols);

/// Adjoint of im2col: accumulates columns back into an image buffer.
template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* image);

/// Rational scale factor num/den.
struct Ratio {
  int num = 1;
  int den = 1;
  double value() const { return static_cast<double>(num) / den; }
};

enum class ResampleMethod { Nearest, Bilinear, Bicubic, AvgPool };

ResampleMethod parse_resample_method(std::string_view name);

/// Catmull-Rom parameter of the bicubic kernel.
inline constexpr double kBicubicA = -0.5;

/// Resamples the two trailing axes of a rank-3 or rank-4 tensor. Pixel centres
/// are aligned (half-pixel convention) and borders are clamped. AvgPool is
/// area averaging, which reduces to block means for integer down-sampling.
template <typename T>
Tensor<T> resample(const Tensor<T>& x, Ratio factor, ResampleMethod method);

/// Default x4 MS up-sampling (bicubic).
template <typename T>
Tensor<T> upsample4(const Tensor<T>& x) {
  return resample(x, Ratio{4, 1}, ResampleMethod::Bicubic);
}

/// Integer block-mean down-sampling.
template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, int factor) {
  return resample(x, Ratio{1, factor}, ResampleMethod::AvgPool);
}

/// Separable Gaussian blur over the two trailing axes with half-sample
/// symmetric borders. sigma <= 0 returns the input unchanged.
template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& x, double sigma);

/// MTF stand-in: Gaussian blur followed by `ratio` x `ratio` block means on a
/// grid anchored at the top-left pixel.
template <typename T>
Tensor<T> mtf_degrade(const Tensor<T>& x, int ratio, double sigma);

/// Repeats a single-channel tensor along the channel axis.
/// [B,1,H,W] -> [B,n,H,W] or [1,H,W] -> [n,H,W].
template <typename T>
Tensor<T> replicate_channels(const Tensor<T>& x, int64_t n);

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

}  // namespace pancraft
