#include "psfdecon/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#include "psfdecon/pmms.hpp"
#include "psfdecon/psf_model.hpp"

namespace psfdecon {

Volume richardson_lucy(const Volume& y, const Kernel& h, const RlOptions& opts) {
  if (opts.iters < 0) throw ConfigError("richardson_lucy: iters must be nonnegative");
  constexpr double kDivEps = 1e-12;
  Eigen::ArrayXd yv = y.values();
  if ((yv < 0.0).any()) {
    std::cerr << "richardson_lucy: clipping negative samples of the observation to 0\n";
    yv = yv.max(0.0);
  }
  ConvolutionOperator op(y.dims(), h, opts.boundary);
  const Eigen::ArrayXd norm = op.adjoint(Eigen::ArrayXd::Ones(y.size())).max(kDivEps);
  Eigen::ArrayXd x = yv.max(kDivEps);
  for (int it = 0; it < opts.iters; ++it) {
    const Eigen::ArrayXd ratio = yv / (op.apply(x) + opts.alpha + kDivEps);
    x = (x * op.adjoint(ratio) / norm).max(0.0);
  }
  return y.with_values(x);
}

Eigen::Matrix<double, 7, 1> NlsParams::pack() const {
  Eigen::Matrix<double, 7, 1> v;
  v << alpha, beta, theta, phi, s[0], s[1], s[2];
  return v;
}

NlsParams NlsParams::unpack(const Eigen::Matrix<double, 7, 1>& v) {
  NlsParams p;
  p.alpha = v[0];
  p.beta = v[1];
  p.theta = v[2];
  p.phi = v[3];
  p.s = v.tail<3>();
  return p;
}

Eigen::Matrix3d NlsParams::precision() const {
  const Eigen::Matrix3d r = rotation_zxz(phi, theta, 0.0);
  return r * s.asDiagonal() * r.transpose();
}

Kernel nls_kernel(const NlsParams& p, const Grid& grid) {
  return gaussian_kernel(p.precision(), grid, true);
}

NlsResult nls_fit(const Volume& y, const Volume& bead, const NlsParams& init, const NlsOptions& opts) {
  require_same_shape(y, bead, "nls_fit");
  using Vec7 = Eigen::Matrix<double, 7, 1>;
  using Mat7 = Eigen::Matrix<double, 7, 7>;
  const Grid grid(bead);
  ConvolutionOperator xop(bead.dims(), bead, Boundary::circular);

  auto project = [&](Vec7 v) {
    v[0] = std::clamp(v[0], opts.alpha_min, opts.alpha_max);
    v[1] = std::clamp(v[1], opts.beta_min, opts.beta_max);
    v[2] = std::clamp(v[2], 0.0, std::numbers::pi);
    v[3] = std::clamp(v[3], -std::numbers::pi, std::numbers::pi);
    for (int i = 4; i < 7; ++i) v[i] = std::max(v[i], 1e-6);
    return v;
  };
  auto residual = [&](const Vec7& v) -> Eigen::VectorXd {
    const NlsParams p = NlsParams::unpack(v);
    const Eigen::ArrayXd gx = xop.apply(nls_kernel(p, grid).values());
    return (y.values() - p.alpha - p.beta * gx).matrix();
  };

  Vec7 p = project(init.pack());
  Eigen::VectorXd r = residual(p);
  double rn = r.norm();
  NlsResult out;
  out.residual_norms.push_back(rn);
  double lambda = opts.damping;
  const Index n = r.size();
  Eigen::MatrixXd jac(n, 7);

  for (int it = 0; it < opts.max_iters; ++it) {
    out.iterations = it + 1;
    for (int i = 0; i < 7; ++i) {
      Vec7 q = p;
      const double h = 1e-6 * std::max(std::abs(p[i]), 1.0);
      q[i] += h;
      jac.col(i) = (residual(q) - r) / h;
    }
    const Mat7 jtj = jac.transpose() * jac;
    const Vec7 g = jac.transpose() * r;
    bool accepted = false;
    double step_norm = 0.0;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      Mat7 a = jtj;
      for (int i = 0; i < 7; ++i) a(i, i) += lambda * std::max(jtj(i, i), 1e-12);
      const Vec7 delta = a.ldlt().solve(-g);
      const Vec7 trial = project(p + delta);
      step_norm = (trial - p).norm();
      if (step_norm < opts.step_tol) break;
      const Eigen::VectorXd rt = residual(trial);
      const double rtn = rt.norm();
      if (rtn < rn) {
        p = trial;
        r = rt;
        rn = rtn;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        out.residual_norms.push_back(rn);
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted || step_norm < opts.step_tol) break;
  }
  out.params = NlsParams::unpack(p);
  return out;
}

PenalizedResult penalized_restore(const Volume& y, const Kernel& h, double alpha, double chi,
                                  const PenalizedOptions& opts) {
  if (!(chi >= 0.0)) throw ConfigError("penalized_restore: chi must be nonnegative");
  if (opts.stages < 1 || opts.iters < 0) throw ConfigError("penalized_restore: bad iteration budget");
  RestorationProblem p;
  p.y = y;
  p.h = h;
  p.alpha = alpha;
  p.w = Eigen::ArrayXd::Ones(y.size());
  p.bound = 1.0;
  p.delta = opts.delta;
  p.boundary = opts.boundary;
  RestorationObjective obj(p, RestorationObjective::Mode::penalized);
  obj.set_chi(chi);
  PenalizedResult out;
  Eigen::ArrayXd x = y.values();
  obj.set_gamma(0.0);
  obj.reset(x);
  const double eps = 1e-10 * std::max(1.0, obj.gradient().matrix().norm());
  const int per_stage = opts.iters / opts.stages;
  for (int j = 1; j <= opts.stages; ++j) {
    obj.set_gamma(std::pow(2.0 * j, 2.0));
    const int budget = j == opts.stages ? opts.iters - per_stage * (opts.stages - 1) : per_stage;
    InnerResult r = mm_subspace_solve(obj, x, eps, budget);
    x = std::move(r.x);
    out.iterations += r.iterations;
  }
  out.x = y.with_values(x);
  return out;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi >= lo) || count < 1) throw ConfigError("log_spaced: need 0 < lo <= hi, count >= 1");
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.push_back(lo * std::pow(hi / lo, t));
  }
  return out;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  const auto prec = os.precision(17);
  os << "chi,snr_db,iterations,runtime_s\n";
  for (const auto& r : rows) os << r.chi << ',' << r.snr_db << ',' << r.iterations << ',' << r.runtime_s << '\n';
  os.precision(prec);
}

}  // namespace psfdecon
