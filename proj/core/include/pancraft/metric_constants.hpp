#pragma once

// Frozen metric parameters. Golden reports record kMetricConstantsVersion;
// bump it whenever any value below changes.

namespace pancraft::metric_constants {

inline constexpr int kVersion = 1;

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kDynamicRange = 1.0;

/// Q2^n and single-band Q block side at PAN resolution, and stride.
inline constexpr int kQBlock = 32;

inline constexpr double kPsnrPeak = 1.0;
inline constexpr double kPsnrCap = 99.0;

/// Denominator guard for PSNR-style divisions.
inline constexpr double kDivEps = 1e-12;

}  // namespace pancraft::metric_constants
