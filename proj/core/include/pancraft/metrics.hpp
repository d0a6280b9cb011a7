#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pancraft/kernels.hpp"
#include "pancraft/metric_constants.hpp"
#include "pancraft/tensor.hpp"

namespace pancraft {

/// Metric name -> value. NaN marks an undefined metric; `notes` says why.
struct MetricReport {
  std::map<std::string, double> values;
  std::vector<std::string> notes;

  bool defined(const std::string& name) const;
  double at(const std::string& name) const;
  void merge(const MetricReport& other);
  /// Undefined values serialize as null.
  std::string to_json() const;
};

/// Mean and sample standard deviation per metric over a set of reports.
/// Undefined entries are skipped.
struct MetricSummary {
  struct Stat {
    double mean = 0.0;
    double std = 0.0;
    int count = 0;
  };
  std::map<std::string, Stat> stats;

  static MetricSummary of(const std::vector<MetricReport>& reports);
  std::string to_json() const;
};

// All metrics take [C,H,W] images and compute in double precision.

/// 100/ratio * sqrt(mean_b(RMSE_b^2 / mean(gt_b)^2)); NaN if a gt band has mean 0.
template <typename T>
double ergas(const Tensor<T>& fused, const Tensor<T>& gt, int ratio);

/// Mean spectral angle in degrees over pixels where both vectors are nonzero.
template <typename T>
double sam(const Tensor<T>& fused, const Tensor<T>& gt);

/// Band-averaged Pearson correlation of 3x3 Laplacian responses on the valid
/// interior. Bands with zero variance in either response are skipped.
template <typename T>
double scc(const Tensor<T>& fused, const Tensor<T>& gt);

/// Band-averaged PSNR with peak 1, capped at 99 dB.
template <typename T>
double psnr(const Tensor<T>& fused, const Tensor<T>& gt);

/// Band-averaged SSIM, Gaussian window over valid positions only.
template <typename T>
double ssim(const Tensor<T>& fused, const Tensor<T>& gt);

/// Hypercomplex quality index averaged over `block` x `block` tiles with
/// stride `block` (one tile covering the image if it is smaller). Band
/// counts that are not a power of two are zero-padded.
template <typename T>
double q2n(const Tensor<T>& fused, const Tensor<T>& gt, int block = metric_constants::kQBlock);

/// Single-band universal image quality index over tiles, as q2n.
template <typename T>
double uiqi(const Tensor<T>& a, const Tensor<T>& b, int block = metric_constants::kQBlock);

/// ERGAS, SAM, SCC, Q2n, PSNR, SSIM.
template <typename T>
MetricReport reduced_metrics(const Tensor<T>& fused, const Tensor<T>& gt, int ratio = 4);

/// D_lambda = 1 - Q2n(mtf_degrade(fused), ms_lr).
template <typename T>
double d_lambda(const Tensor<T>& fused, const Tensor<T>& ms_lr, int ratio, double mtf_sigma);

/// D_s = mean_b |Q(fused_b, pan) - Q(ms_b, mtf_degrade(pan))|, with blocks of
/// kQBlock at PAN resolution and kQBlock / ratio at MS resolution.
template <typename T>
double d_s(const Tensor<T>& fused, const Tensor<T>& ms_lr, const Tensor<T>& pan, int ratio, double mtf_sigma);

inline double hqnr(double d_lambda, double d_s) { return (1.0 - d_lambda) * (1.0 - d_s); }

/// D_lambda, D_s, HQNR. fused [C,4H,4W], ms_lr [C,H,W], pan [1,4H,4W].
template <typename T>
MetricReport full_res_metrics(const Tensor<T>& fused, const Tensor<T>& ms_lr, const Tensor<T>& pan, int ratio = 4,
                              double mtf_sigma = 1.7);

}  // namespace pancraft
