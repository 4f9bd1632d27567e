#pragma once

#include <cmath>
#include <limits>

#include "psfdecon/errors.hpp"

namespace psfdecon {

/// Above this argument lambert_w_of_exp seeds from the asymptotic series
/// instead of forming exp(u).
inline constexpr double kLambertAsymptoticSwitch = 100.0;

namespace detail {

// Solve t + exp(t) = u for t = log W(e^u); the map is convex and
// increasing, so Newton from a close seed converges monotonically.
template <typename Scalar>
Scalar log_lambert_newton(Scalar u, Scalar t) {
  for (int it = 0; it < 50; ++it) {
    const Scalar et = std::exp(t);
    const Scalar f = et + t - u;
    const Scalar step = f / (et + Scalar(1));
    t -= step;
    if (std::abs(step) <= Scalar(4) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + std::abs(t)))
      break;
  }
  return t;
}

// Asymptotic expansion of W(e^u) in L1 = u, L2 = log u.
template <typename Scalar>
Scalar lambert_exp_series(Scalar u) {
  const Scalar l1 = u;
  const Scalar l2 = std::log(u);
  return l1 - l2 + l2 / l1 + l2 * (l2 - Scalar(2)) / (Scalar(2) * l1 * l1) +
         l2 * (Scalar(6) - Scalar(9) * l2 + Scalar(2) * l2 * l2) / (Scalar(6) * l1 * l1 * l1);
}

}  // namespace detail

/// W(e^u) on the principal branch, without forming e^u.
template <typename Scalar>
Scalar lambert_w_of_exp(Scalar u) {
  if (std::isnan(u)) return u;
  if (u == std::numeric_limits<Scalar>::infinity()) return u;
  if (u == -std::numeric_limits<Scalar>::infinity()) return Scalar(0);
  if (u > Scalar(kLambertAsymptoticSwitch)) {
    // Series seed is within ~1e-8 relative here; one or two Newton steps polish it.
    return std::exp(detail::log_lambert_newton(u, std::log(detail::lambert_exp_series(u))));
  }
  if (u < Scalar(-40)) {
    // W(z) = z - z^2 + ... with z = e^u below double resolution of 1.
    const Scalar z = std::exp(u);
    return z * (Scalar(1) - z);
  }
  // Winitzki-type seed from log(1 + e^u).
  const Scalar l = u > Scalar(30) ? u : std::log1p(std::exp(u));
  const Scalar w0 = l * (Scalar(1) - std::log1p(l) / (Scalar(2) + l));
  return std::exp(detail::log_lambert_newton(u, std::log(w0)));
}

/// Principal branch W(z) for z >= 0.
template <typename Scalar>
Scalar lambert_w(Scalar z) {
  if (z < Scalar(0)) throw ConfigError("lambert_w: argument must be nonnegative");
  if (z == Scalar(0)) return Scalar(0);
  return lambert_w_of_exp(std::log(z));
}

}  // namespace psfdecon
