#pragma once

#include "psfdecon/volume.hpp"

namespace psfdecon {

/// Signal-to-noise ratio in dB: 10 log10(|ref|^2 / |ref - test|^2).
/// Returns `cap_db` when the error power is below 1e-30.
double snr_db(const Volume& ref, const Volume& test, double cap_db = 300.0);

/// Background, scale and kernel of a fitted bead model alpha + beta (h * x).
struct BeadModel {
  double alpha = 0.0;
  double beta = 1.0;
  Kernel h;
};

/// Percent root-mean-square difference between two bead models rendered
/// through the same bead (circular convolution).
double prd_percent(const BeadModel& estimate, const BeadModel& truth, const Volume& bead);

}  // namespace psfdecon
