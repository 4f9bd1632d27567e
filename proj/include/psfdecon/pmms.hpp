#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <ostream>
#include <vector>

#include "psfdecon/convolution.hpp"
#include "psfdecon/noise.hpp"
#include "psfdecon/volume.hpp"

namespace psfdecon {

/// minimize g(x) subject to |W (Hx - y + alpha)|^2 <= B and x >= 0, with g
/// the smoothed total variation.
struct RestorationProblem {
  Volume y;
  Kernel h;
  double alpha = 0.0;
  Eigen::ArrayXd w;  // diagonal of W
  double bound = 0.0;
  double delta = 0.1;
  Boundary boundary = Boundary::zero;
};

struct RestorationOptions {
  double delta = 0.1;
  /// <= 0 selects the voxel count.
  double bound = 0.0;
  /// Window of the box filter applied to y before evaluating sigma.
  int weight_smooth = 3;
  Boundary boundary = Boundary::zero;
};

/// W = 1 / sigma(smooth(y) - alpha), with sigma floored at max(sqrt(b), 1e-8).
Eigen::ArrayXd heteroscedastic_weights(const Volume& y, double alpha, const NoiseParams& noise,
                                       int smooth);

RestorationProblem make_restoration_problem(const Volume& y, const Kernel& h, double alpha,
                                            const NoiseParams& noise,
                                            const RestorationOptions& opts = {});

/// sum_m sqrt(delta + sum_a (G_a x)_m^2 / r_a), G_a forward differences
/// with a zero last difference.
double reg_g(const Volume& x, double delta);
Volume grad_g(const Volume& x, double delta);

double data_fidelity_f(const Volume& x, const RestorationProblem& p);

/// Squared distance of W(Hx - y + alpha) to the ball of radius sqrt(B).
double penalty_R1(const Volume& x, const RestorationProblem& p);
Volume grad_R1(const Volume& x, const RestorationProblem& p);

/// Squared distance to the nonnegative orthant.
double penalty_R2(const Volume& x);
Volume grad_R2(const Volume& x);

/// A(x) d with A = A_g(x) + gamma (A_R1 + A_R2), A_g = sum_a G_a^T
/// Diag(1 / (r_a psi)) G_a, A_R1 = 2 H^T W^2 H, A_R2 = 2 I. These satisfy
/// F(x + d) <= F(x) + grad^T d + 1/2 d^T A d.
Volume curvature_apply(const Volume& x, const Volume& d, double gamma, const RestorationProblem& p);

/// F_gamma = g + gamma (R1 + R2).
double penalized_objective(const Volume& x, double gamma, const RestorationProblem& p);
Volume penalized_gradient(const Volume& x, double gamma, const RestorationProblem& p);

struct InnerResult {
  Eigen::ArrayXd x;
  int iterations = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  std::vector<double> values;
};

/// Smooth objective on x with cached H x, in one of two forms:
///   constrained: g(x) + gamma (R1(x) + R2(x))
///   penalized:   |W(Hx - y + alpha)|^2 + chi g(x) + gamma R2(x)
/// Satisfies the interface expected by mm_subspace_solve.
class RestorationObjective {
 public:
  enum class Mode { constrained, penalized };

  RestorationObjective(const RestorationProblem& p, Mode mode);

  void set_gamma(double gamma) { gamma_ = gamma; }
  void set_chi(double chi) { chi_ = chi; }

  void reset(const Eigen::ArrayXd& x);
  double value() const { return value_; }
  const Eigen::ArrayXd& gradient() const { return grad_; }
  const Eigen::ArrayXd& x() const { return x_; }
  Eigen::MatrixXd curvature(const std::vector<Eigen::ArrayXd>& dirs);
  void move(const Eigen::VectorXd& u);

  struct Terms {
    double g = 0.0, f = 0.0, r1 = 0.0, r2 = 0.0;
  };
  const Terms& terms() const { return terms_; }

 private:
  void evaluate();

  const RestorationProblem& p_;
  Mode mode_;
  ConvolutionOperator h_;
  double gamma_ = 1.0;
  double chi_ = 0.0;
  Eigen::ArrayXd x_, hx_, grad_, psi_;
  double value_ = 0.0;
  Terms terms_;
  std::vector<Eigen::ArrayXd> dirs_, hdirs_;
  Eigen::ArrayXd last_step_, last_hstep_;
  int moves_ = 0;
};

/// Pseudo-inverse solve of the small symmetric system B u = -b, dropping
/// eigenvalues below 1e-12 trace(B).
Eigen::VectorXd subspace_step(const Eigen::MatrixXd& b_mat, const Eigen::VectorXd& b);

/// Memory-gradient subspace MM on an objective exposing
///   reset(x), value(), gradient(), x(),
///   curvature(dirs) -> D^T A(x) D for the current point,
///   move(u) -> x += D u for the last dirs, refreshing value and gradient.
/// Stops when |grad| < eps or after max_inner steps. Throws NumericError
/// on a value increase beyond 1e-9 relative.
template <typename Objective>
InnerResult mm_subspace_solve(Objective& obj, const Eigen::ArrayXd& x0, double eps, int max_inner) {
  InnerResult out;
  obj.reset(x0);
  out.values.push_back(obj.value());
  Eigen::ArrayXd last_step;
  for (int k = 0; k < max_inner; ++k) {
    const double gnorm = obj.gradient().matrix().norm();
    if (gnorm < eps) break;
    std::vector<Eigen::ArrayXd> dirs{-obj.gradient()};
    if (last_step.size() == obj.gradient().size() && last_step.matrix().squaredNorm() > 0.0)
      dirs.push_back(last_step);
    const Eigen::MatrixXd b_mat = obj.curvature(dirs);
    Eigen::VectorXd b(static_cast<Index>(dirs.size()));
    for (size_t i = 0; i < dirs.size(); ++i) b[static_cast<Index>(i)] = (dirs[i] * obj.gradient()).sum();
    const Eigen::VectorXd u = subspace_step(b_mat, b);
    if (!u.allFinite() || u.squaredNorm() == 0.0) break;
    last_step = Eigen::ArrayXd::Zero(obj.gradient().size());
    for (size_t i = 0; i < dirs.size(); ++i) last_step += u[static_cast<Index>(i)] * dirs[i];
    const double before = obj.value();
    obj.move(u);
    out.values.push_back(obj.value());
    out.iterations = k + 1;
    if (obj.value() > before + 1e-9 * std::max(1.0, std::abs(before)))
      throw NumericError("mm_subspace_solve: objective increased at step " + std::to_string(k + 1),
                         out.values);
  }
  out.x = obj.x();
  out.value = obj.value();
  out.grad_norm = obj.gradient().matrix().norm();
  return out;
}

/// Runs mm_subspace_solve on F_gamma for one penalty weight.
InnerResult mm_inner_solve(const Volume& x_init, double gamma, double eps, const RestorationProblem& p,
                           int max_inner);

struct PenaltySchedule {
  /// gamma_j = (gamma_scale j)^gamma_power, eps_j = eps_scale / gamma_j^eps_power, j >= 1.
  double gamma_scale = 2.0;
  double gamma_power = 2.0;
  double eps_scale = 1e5;
  double eps_power = 0.75;
  int max_outer = 80;
  int max_inner = 300;

  double gamma(int j) const { return std::pow(gamma_scale * j, gamma_power); }
  double eps(int j) const { return eps_scale / std::pow(gamma(j), eps_power); }
};

/// gamma_j = (2 j)^2, eps_j = 1e5 / gamma_j^0.75.
PenaltySchedule simulation_schedule();
/// gamma_j = (1.5 j)^1.2, eps_j = 1e5 / gamma_j^0.5.
PenaltySchedule real_data_schedule();

struct PmmsLogRow {
  int outer = 0;
  double gamma = 0.0;
  double eps = 0.0;
  int inner_iterations = 0;
  double f_gamma = 0.0;
  double g = 0.0;
  double f = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double grad_norm = 0.0;
  double min_x = 0.0;
};

struct PmmsResult {
  Volume x;
  std::vector<PmmsLogRow> log;
};

/// Exterior-penalty loop: each gamma_j stage warm-starts from the previous
/// iterate. x0 defaults to y.
PmmsResult pmms_run(const RestorationProblem& p, const PenaltySchedule& schedule,
                    const Volume* x0 = nullptr);

void write_pmms_log_csv(std::ostream& os, const std::vector<PmmsLogRow>& log);

}  // namespace psfdecon
