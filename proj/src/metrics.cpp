#include "psfdecon/metrics.hpp"

#include <cmath>

#include "psfdecon/convolution.hpp"

namespace psfdecon {

double snr_db(const Volume& ref, const Volume& test, double cap_db) {
  require_same_shape(ref, test, "snr_db");
  const double err = (ref.values() - test.values()).square().sum();
  if (err < 1e-30) return cap_db;
  return 10.0 * std::log10(ref.values().square().sum() / err);
}

double prd_percent(const BeadModel& estimate, const BeadModel& truth, const Volume& bead) {
  require_same_shape(estimate.h, bead, "prd_percent");
  require_same_shape(truth.h, bead, "prd_percent");
  const Eigen::ArrayXd est =
      estimate.alpha + estimate.beta * convolve_circular(bead, estimate.h).values();
  const Eigen::ArrayXd ref = truth.alpha + truth.beta * convolve_circular(bead, truth.h).values();
  const double denom = std::sqrt(ref.square().sum());
  if (denom == 0.0) throw ConfigError("prd_percent: reference model has zero norm");
  return 100.0 * std::sqrt((est - ref).square().sum()) / denom;
}

}  // namespace psfdecon
