#pragma once

#include <Eigen/Core>

#include <ostream>
#include <vector>

#include "psfdecon/convolution.hpp"
#include "psfdecon/gentle.hpp"
#include "psfdecon/volume.hpp"

namespace psfdecon {

struct RlOptions {
  int iters = 50;
  double alpha = 0.0;  // known background added to Hx
  Boundary boundary = Boundary::zero;
};

/// Richardson-Lucy: x <- x H^T(y / (Hx + alpha + 1e-12)) / H^T 1, started
/// at max(y, 1e-12). Negative samples of y are clipped to zero.
Volume richardson_lucy(const Volume& y, const Kernel& h, const RlOptions& opts = {});

/// Gaussian bead model parameters: S = R diag(s) R^T with R = Rz(phi) Rx(theta).
struct NlsParams {
  double alpha = 0.0;
  double beta = 1.0;
  double theta = 0.0;
  double phi = 0.0;
  Eigen::Vector3d s = Eigen::Vector3d::Ones();

  Eigen::Matrix<double, 7, 1> pack() const;
  static NlsParams unpack(const Eigen::Matrix<double, 7, 1>& v);
  Eigen::Matrix3d precision() const;
};

struct NlsOptions {
  int max_iters = 200;
  double alpha_min = 0.0, alpha_max = 1.0;
  double beta_min = 0.0, beta_max = 3.0;
  double damping = 1e-3;
  double step_tol = 1e-9;
};

struct NlsResult {
  NlsParams params;
  std::vector<double> residual_norms;  // accepted steps, starting with the initial point
  int iterations = 0;
};

/// Levenberg-Marquardt on r(p) = y - alpha - beta g(S(p)) * x (circular),
/// forward-difference Jacobian, Marquardt scaling, projection on the box
/// after each step.
NlsResult nls_fit(const Volume& y, const Volume& bead, const NlsParams& init, const NlsOptions& opts = {});

/// Normalized Gaussian kernel of the NLS parameters on the bead grid.
Kernel nls_kernel(const NlsParams& p, const Grid& grid);

struct PenalizedOptions {
  double delta = 0.1;
  int iters = 300;
  int stages = 5;  // penalty weights (2 j)^2 on x >= 0
  Boundary boundary = Boundary::zero;
};

struct PenalizedResult {
  Volume x;
  int iterations = 0;
};

/// argmin |Hx - y + alpha|^2 + chi g(x) over x >= 0 (exterior penalty),
/// started from y.
PenalizedResult penalized_restore(const Volume& y, const Kernel& h, double alpha, double chi,
                         const PenalizedOptions& opts = {});

struct SweepRow {
  double chi = 0.0;
  double snr_db = 0.0;
  int iterations = 0;
  double runtime_s = 0.0;
};

/// chi values log-spaced over [lo, hi].
std::vector<double> log_spaced(double lo, double hi, int count);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace psfdecon
