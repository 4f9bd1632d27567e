#pragma once

#include <Eigen/Core>

#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "psfdecon/convolution.hpp"
#include "psfdecon/volume.hpp"

namespace psfdecon {

/// Gaussian-prior kernel fitting on a calibrated bead image.
///
/// Minimizes over (alpha, beta, h, D)
///
///   1/2 |y - alpha 1 - beta (h * x)|^2 + lambda Psi(h, D) + eps2 |D|_F^2
///
/// with alpha, beta boxed, h on the simplex, D positive semidefinite, and
/// Psi the smooth extension of KL(h || zeta g(D + eps1 I)) where g is the
/// sampled Gaussian density with precision D + eps1 I. Convolution is
/// circular.
struct GentleConfig {
  double lambda = 1.0;
  double eps1 = 1e-6;
  double eps2 = 1e-6;
  /// Measure of one grid cell; <= 0 selects r_X r_Y r_Z.
  double zeta = 0.0;
  double alpha_min = 0.0, alpha_max = 1.0;
  double beta_min = 0.0, beta_max = 3.0;
  /// h step; <= 0 selects gamma_h_factor / L with L = beta_max^2 max|DFT(x)|^2.
  double gamma_h = 0.0;
  double gamma_h_factor = 1.9;
  double gamma_d = 1e6;
  double stop_tol = 1e-7;
  int max_iters = 2000;
  /// Allowed relative cost increase per iteration before failing.
  double descent_tol = 1e-9;
};

struct GentleState {
  double alpha = 0.0;
  double beta = 1.0;
  Kernel h;
  Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
};

/// alpha = 0, beta = 1 clipped to the box, uniform h, D = 0.
GentleState default_gentle_init(const Volume& bead, const GentleConfig& cfg);

/// Lipschitz bound beta_max^2 max|DFT(x)|^2 of the h-gradient.
double gentle_lipschitz(const Volume& bead, const GentleConfig& cfg);

/// Config with zeta and gamma_h defaults filled in for this bead.
GentleConfig resolve_gentle_config(const Volume& bead, GentleConfig cfg);

/// Smooth log-det surrogate: sum_i phi(s_i) over the eigenvalues of D, with
/// phi(t) = -log(t + eps1) for t >= 0 and a quadratic continuation below.
double log_det_barrier(const Eigen::Matrix3d& d, double eps1);

/// Per-voxel linear coefficients of Psi in h:
/// c_n = 1/2 (3 log 2pi + Phi(D) + w_n^T (D + eps1 I) w_n).
Eigen::ArrayXd kl_coefficients(const Eigen::Matrix3d& d, const Grid& grid, double eps1);

/// Objective value; +inf outside the feasible set.
double cost_F(const GentleState& s, const Volume& y, const Volume& bead, const GentleConfig& cfg);

/// Exact alpha minimizer, clipped to [alpha_min, alpha_max].
double update_alpha(const GentleState& s, const Volume& y, const Volume& bead,
                    const GentleConfig& cfg);
/// Exact beta minimizer, clipped to [beta_min, beta_max]. Throws when h * x = 0.
double update_beta(const GentleState& s, const Volume& y, const Volume& bead,
                   const GentleConfig& cfg);

/// Entropic proximity problem on the simplex:
///   argmin_h  (1/rho) sum_n (h_n log h_n - h_n log zeta + c_n h_n) + 1/2 |h - h'|^2
/// subject to h in the simplex.
struct EntropicProxProblem {
  Eigen::ArrayXd hprime;
  Eigen::ArrayXd c;
  double rho = 1.0;
  double log_zeta = 0.0;
  /// Starting multiplier for the root search.
  double mu_start = 0.0;
  double root_tol = 1e-12;
};

struct EntropicProxResult {
  Eigen::ArrayXd h;
  double mu = 0.0;
  double kappa = 0.0;  // sum(h) - 1 at mu
  int iterations = 0;
};

/// h_n = W(rho exp(w_n(mu))) / rho with w_n(mu) = -1 - c_n + rho (h'_n - mu)
/// + log zeta, and mu the unique zero of sum_n h_n(mu) - 1, located by
/// Newton steps safeguarded with bisection.
EntropicProxResult prox_h(const EntropicProxProblem& problem);

/// Closed-form proximal step on D for fixed h (result is positive semidefinite).
Eigen::Matrix3d prox_D(const Eigen::Matrix3d& d_prime, const Eigen::ArrayXd& h, const Grid& grid,
                       const GentleConfig& cfg);

struct GentleTraceRow {
  int iter = 0;
  double cost = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double h_sum = 0.0;
  double d_eig_min = 0.0;
  double d_eig_max = 0.0;
  double step_norm = 0.0;
};

struct GentleResult {
  GentleState state;
  std::vector<GentleTraceRow> trace;
  int iterations = 0;
  bool converged = false;
};

/// Alternating minimization: exact alpha and beta updates, a forward-backward
/// step on h, a proximal step on D. Stops when the joint step norm drops to
/// stop_tol or after max_iters. Throws NumericError if the cost increases.
GentleResult run_gentle(const Volume& y, const Volume& bead, const GentleConfig& cfg,
                        const GentleState& init);

void write_gentle_trace_csv(std::ostream& os, const std::vector<GentleTraceRow>& trace);

/// |y - alpha - beta (g(D + eps1 I) * x)|^2 with g the normalized Gaussian.
double gaussian_refit_criterion(const GentleState& s, const Volume& y, const Volume& bead,
                                const GentleConfig& cfg);

struct LambdaSearchResult {
  double lambda = 0.0;
  GentleResult best;
  std::vector<double> lambdas;   // sorted ascending
  std::vector<double> criteria;  // aligned with lambdas
};

/// Runs GENTLE for every lambda and keeps the one minimizing
/// gaussian_refit_criterion; ties go to the smaller lambda.
LambdaSearchResult lambda_grid_search(const Volume& y, const Volume& bead, const GentleConfig& cfg,
                                      std::vector<double> lambdas,
                                      const std::optional<GentleState>& init = std::nullopt);

/// Normalized kernel rendered from the fitted precision D + eps1 I.
Kernel gentle_gaussian_kernel(const GentleState& s, const Grid& grid, double eps1);

}  // namespace psfdecon
