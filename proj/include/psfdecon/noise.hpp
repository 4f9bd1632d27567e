#pragma once

#include <Eigen/Core>

#include <cmath>
#include <istream>
#include <ostream>
#include <vector>

#include "psfdecon/volume.hpp"

namespace psfdecon {

/// Affine variance law sigma^2(t) = a t + b.
struct NoiseParams {
  double a = 0.0;
  double b = 0.0;
};

/// sqrt(a t + b) for t >= 0, else 0.
inline double sigma(double t, const NoiseParams& p) { return t >= 0.0 ? std::sqrt(p.a * t + p.b) : 0.0; }

template <typename Derived>
Eigen::ArrayXd sigma(const Eigen::ArrayBase<Derived>& t, const NoiseParams& p) {
  return (t.derived() >= 0.0).select((p.a * t.derived() + p.b).max(0.0).sqrt(), 0.0);
}

/// Mean over an s x s x s window (s odd) with mirrored edges.
Volume box_smooth(const Volume& v, int s);

struct Quantization {
  std::vector<double> levels;   // ascending
  Eigen::ArrayXi assignment;    // level index per input value
  std::vector<double> mse;      // after each sweep
  int requested_levels = 0;
  int sweeps = 0;
};

/// Lloyd-Max scalar quantizer (1-D k-means) started from empirical
/// quantiles. J is reduced to the number of distinct values if larger.
Quantization lloyd_max_quantize(const Eigen::ArrayXd& values, int levels, int max_sweeps = 500,
                                double tol = 1e-9);

struct SegmentStat {
  int j = 0;
  double level = 0.0;
  double mean = 0.0;
  double var = 0.0;
  Index count = 0;
  bool used = false;  // entered the regression
};

struct NoiseEstimateOptions {
  int s = 5;
  int levels = 25;
  bool weighted = true;
  Index min_count = 10;
};

struct NoiseEstimate {
  NoiseParams params;
  std::vector<SegmentStat> segments;
  double r2 = 0.0;
  int levels_used = 0;
};

/// Smooth, segment into level sets of the smoothed volume, take mean and
/// variance of the raw volume per segment, and fit var = a mean + b by
/// (count-weighted) least squares with a, b >= 0.
NoiseEstimate estimate_noise(const Volume& y, const NoiseEstimateOptions& opts = {});

void write_noise_report_csv(std::ostream& os, const NoiseEstimate& est);

/// (a, b) from the "fit" row of a report written by write_noise_report_csv.
NoiseParams read_noise_report_csv(std::istream& is);

}  // namespace psfdecon
