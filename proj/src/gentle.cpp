#include "psfdecon/gentle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "psfdecon/lambert_w.hpp"
#include "psfdecon/psf_model.hpp"

namespace psfdecon {

namespace {

constexpr double kLog2Pi3 = 3.0 * 1.8378770664093454835606594728112;  // 3 log(2 pi)

void require_gentle_shapes(const GentleState& s, const Volume& y, const Volume& bead) {
  require_same_shape(y, bead, "gentle");
  require_same_shape(y, s.h, "gentle kernel");
}

// y - alpha - beta * xh
Eigen::ArrayXd residual(const Volume& y, double alpha, double beta, const Eigen::ArrayXd& xh) {
  return y.values() - alpha - beta * xh;
}

bool feasible(const GentleState& s, const GentleConfig& cfg) {
  if (!(s.alpha >= cfg.alpha_min && s.alpha <= cfg.alpha_max)) return false;
  if (!(s.beta >= cfg.beta_min && s.beta <= cfg.beta_max)) return false;
  if (!on_simplex(s.h.values(), 1e-9)) return false;
  if (!s.d.allFinite() || (s.d - s.d.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + s.d.norm()))
    return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s.d, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -cfg.eps1 * (1.0 + 1e-9);
}

double kl_part(const Eigen::ArrayXd& h, const Eigen::ArrayXd& c, double log_zeta) {
  double acc = 0.0;
  for (Index n = 0; n < h.size(); ++n) {
    const double hn = h[n];
    if (hn > 0.0) acc += hn * std::log(hn);
    acc += hn * (c[n] - log_zeta);
  }
  return acc;
}

double clip(double v, double lo, double hi) { return std::max(lo, std::min(v, hi)); }

void validate_config(const GentleConfig& cfg) {
  if (!(cfg.lambda >= 0.0)) throw ConfigError("gentle: lambda must be nonnegative");
  if (!(cfg.eps1 > 0.0) || !(cfg.eps2 > 0.0)) throw ConfigError("gentle: eps1, eps2 must be positive");
  if (!(cfg.alpha_min <= cfg.alpha_max)) throw ConfigError("gentle: empty alpha interval");
  if (!(cfg.beta_min <= cfg.beta_max)) throw ConfigError("gentle: empty beta interval");
  if (!(cfg.gamma_d > 0.0)) throw ConfigError("gentle: gamma_d must be positive");
  if (cfg.max_iters < 0) throw ConfigError("gentle: max_iters must be nonnegative");
}

// Per-run solver: caches the bead operator, the grid and the prox multiplier.
class GentleSolver {
 public:
  GentleSolver(const Volume& y, const Volume& bead, const GentleConfig& cfg)
      : y_(y), cfg_(cfg), grid_(bead), xop_(bead.dims(), bead, Boundary::circular) {}

  Eigen::ArrayXd x_apply(const Eigen::ArrayXd& h) { return xop_.apply(h); }
  Eigen::ArrayXd x_adjoint(const Eigen::ArrayXd& r) { return xop_.adjoint(r); }

  double cost(const GentleState& s, const Eigen::ArrayXd& xh) const {
    if (!feasible(s, cfg_)) return std::numeric_limits<double>::infinity();
    const double data = 0.5 * residual(y_, s.alpha, s.beta, xh).matrix().squaredNorm();
    double reg = 0.0;
    if (cfg_.lambda != 0.0)
      reg = cfg_.lambda * kl_part(s.h.values(), kl_coefficients(s.d, grid_, cfg_.eps1),
                                  std::log(cfg_.zeta));
    return data + reg + cfg_.eps2 * s.d.squaredNorm();
  }

  GentleResult run(const GentleState& init) {
    GentleResult out;
    GentleState s = init;
    Eigen::ArrayXd xh = x_apply(s.h.values());
    double f_prev = cost(s, xh);
    if (!std::isfinite(f_prev)) throw ConfigError("run_gentle: initial state is infeasible");
    std::vector<double> costs{f_prev};
    const double rho = cfg_.lambda > 0.0 ? 1.0 / (cfg_.lambda * cfg_.gamma_h) : 0.0;
    double mu = 0.0;

    for (int it = 1; it <= cfg_.max_iters; ++it) {
      const GentleState old = s;

      s.alpha = clip((y_.values() - s.beta * xh).mean(), cfg_.alpha_min, cfg_.alpha_max);
      const double xh2 = xh.matrix().squaredNorm();
      if (!(xh2 > 0.0)) throw NumericError("run_gentle: h * x vanished", costs);
      s.beta = clip(((y_.values() - s.alpha) * xh).sum() / xh2, cfg_.beta_min, cfg_.beta_max);

      const Eigen::ArrayXd r = residual(y_, s.alpha, s.beta, xh);
      Eigen::ArrayXd hprime = s.h.values() + cfg_.gamma_h * s.beta * x_adjoint(r);
      if (cfg_.lambda > 0.0) {
        EntropicProxProblem p;
        p.hprime = std::move(hprime);
        p.c = kl_coefficients(s.d, grid_, cfg_.eps1);
        p.rho = rho;
        p.log_zeta = std::log(cfg_.zeta);
        p.mu_start = mu;
        EntropicProxResult pr = prox_h(p);
        mu = pr.mu;
        s.h.values() = std::move(pr.h);
      } else {
        s.h.values() = project_simplex(hprime);
      }

      s.d = prox_D(s.d, s.h.values(), grid_, cfg_);

      xh = x_apply(s.h.values());
      const double f = cost(s, xh);
      costs.push_back(f);
      if (!(f <= f_prev + cfg_.descent_tol * std::max(1.0, std::abs(f_prev))))
        throw NumericError("run_gentle: cost increased at iteration " + std::to_string(it) +
                               " from " + std::to_string(f_prev) + " to " + std::to_string(f),
                           costs);

      const double step = std::sqrt(std::pow(s.alpha - old.alpha, 2) + std::pow(s.beta - old.beta, 2) +
                                    (s.h.values() - old.h.values()).matrix().squaredNorm() +
                                    (s.d - old.d).squaredNorm());
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s.d, Eigen::EigenvaluesOnly);
      out.trace.push_back({it, f, s.alpha, s.beta, s.h.values().sum(), es.eigenvalues().minCoeff(),
                           es.eigenvalues().maxCoeff(), step});
      out.iterations = it;
      f_prev = f;
      if (step <= cfg_.stop_tol) {
        out.converged = true;
        break;
      }
    }
    out.state = std::move(s);
    return out;
  }

  // Euclidean projection onto the simplex (lambda = 0 path).
  static Eigen::ArrayXd project_simplex(const Eigen::ArrayXd& v) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, tau = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
      css += u[i];
      const double t = (css - 1.0) / static_cast<double>(i + 1);
      if (u[i] - t > 0.0) tau = t;
    }
    return (v - tau).max(0.0);
  }

 private:
  const Volume& y_;
  GentleConfig cfg_;
  Grid grid_;
  ConvolutionOperator xop_;
};

}  // namespace

GentleState default_gentle_init(const Volume& bead, const GentleConfig& cfg) {
  GentleState s;
  s.alpha = clip(0.0, cfg.alpha_min, cfg.alpha_max);
  s.beta = clip(1.0, cfg.beta_min, cfg.beta_max);
  s.h = Kernel(bead.dims(), bead.voxel_um(),
               Eigen::ArrayXd::Constant(bead.size(), 1.0 / static_cast<double>(bead.size())));
  s.d.setZero();
  return s;
}

double gentle_lipschitz(const Volume& bead, const GentleConfig& cfg) {
  return cfg.beta_max * cfg.beta_max * dft_max_power(bead);
}

GentleConfig resolve_gentle_config(const Volume& bead, GentleConfig cfg) {
  validate_config(cfg);
  if (!(cfg.zeta > 0.0)) cfg.zeta = bead.voxel_um().prod();
  const double lip = gentle_lipschitz(bead, cfg);
  if (!(lip > 0.0)) throw ConfigError("gentle: bead image has no energy");
  if (!(cfg.gamma_h > 0.0)) {
    if (!(cfg.gamma_h_factor > 0.0 && cfg.gamma_h_factor < 2.0))
      throw ConfigError("gentle: gamma_h_factor must lie in (0, 2)");
    cfg.gamma_h = cfg.gamma_h_factor / lip;
  }
  if (!(cfg.gamma_h < 2.0 / lip))
    throw ConfigError("gentle: gamma_h = " + std::to_string(cfg.gamma_h) +
                      " violates the step bound 2/L = " + std::to_string(2.0 / lip));
  return cfg;
}

double log_det_barrier(const Eigen::Matrix3d& d, double eps1) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (d + d.transpose()),
                                                    Eigen::EigenvaluesOnly);
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double t = es.eigenvalues()[i];
    if (t >= 0.0)
      acc -= std::log(t + eps1);
    else
      acc += -std::log(eps1) - t / eps1 + t * t / (eps1 * eps1);
  }
  return acc;
}

Eigen::ArrayXd kl_coefficients(const Eigen::Matrix3d& d, const Grid& grid, double eps1) {
  const double base = kLog2Pi3 + log_det_barrier(d, eps1);
  const Eigen::Matrix3d p = d + eps1 * Eigen::Matrix3d::Identity();
  return 0.5 * (base + grid.quadratic_form(p));
}

double cost_F(const GentleState& s, const Volume& y, const Volume& bead, const GentleConfig& cfg) {
  require_gentle_shapes(s, y, bead);
  GentleConfig c = cfg;
  if (!(c.zeta > 0.0)) c.zeta = bead.voxel_um().prod();
  GentleSolver solver(y, bead, c);
  return solver.cost(s, solver.x_apply(s.h.values()));
}

double update_alpha(const GentleState& s, const Volume& y, const Volume& bead,
                    const GentleConfig& cfg) {
  require_gentle_shapes(s, y, bead);
  ConvolutionOperator op(bead.dims(), bead, Boundary::circular);
  const Eigen::ArrayXd xh = op.apply(s.h.values());
  return clip((y.values() - s.beta * xh).mean(), cfg.alpha_min, cfg.alpha_max);
}

double update_beta(const GentleState& s, const Volume& y, const Volume& bead,
                   const GentleConfig& cfg) {
  require_gentle_shapes(s, y, bead);
  ConvolutionOperator op(bead.dims(), bead, Boundary::circular);
  const Eigen::ArrayXd xh = op.apply(s.h.values());
  const double xh2 = xh.matrix().squaredNorm();
  if (!(xh2 > 0.0)) throw NumericError("update_beta: h * x is identically zero");
  return clip(((y.values() - s.alpha) * xh).sum() / xh2, cfg.beta_min, cfg.beta_max);
}

EntropicProxResult prox_h(const EntropicProxProblem& p) {
  const Index n = p.hprime.size();
  if (n == 0 || p.c.size() != n) throw ShapeError("prox_h: hprime and c lengths differ");
  if (!(p.rho > 0.0) || !std::isfinite(p.rho)) throw ConfigError("prox_h: rho must be positive");
  if (!p.c.allFinite() || !p.hprime.allFinite()) throw ConfigError("prox_h: non-finite input");

  // u_n(mu) = base_n - rho mu is the log of the Lambert W argument.
  const Eigen::ArrayXd base = std::log(p.rho) - 1.0 - p.c + p.rho * p.hprime + p.log_zeta;
  Eigen::ArrayXd w(n);

  auto eval = [&](double mu, double& slope) {
    double sum = 0.0, dsum = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double wi = lambert_w_of_exp(base[i] - p.rho * mu);
      w[i] = wi;
      sum += wi;
      dsum += wi / (1.0 + wi);
    }
    slope = -dsum;
    return sum / p.rho - 1.0;
  };

  EntropicProxResult out;
  double slope = 0.0;
  double mu = p.mu_start;
  double kappa = eval(mu, slope);
  int iters = 1;

  // Bracket the root: kappa(lo) > 0 > kappa(hi).
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  (kappa > 0.0 ? lo : hi) = mu;
  double delta = 1.0 / p.rho;
  const int kMaxIters = 400;
  while (kappa != 0.0 && (!std::isfinite(lo) || !std::isfinite(hi))) {
    if (std::abs(kappa) <= p.root_tol) break;
    // Newton from the positive side stays left of the root since kappa is convex.
    double next;
    if (kappa > 0.0 && slope < 0.0) {
      next = mu - kappa / slope;
      if (!(next > mu)) next = mu + delta;
    } else {
      next = mu - delta;
    }
    delta *= 2.0;
    mu = next;
    kappa = eval(mu, slope);
    if (++iters > kMaxIters) throw NumericError("prox_h: failed to bracket the multiplier");
    (kappa > 0.0 ? lo : hi) = mu;
  }

  while (std::abs(kappa) > p.root_tol) {
    double next = slope < 0.0 ? mu - kappa / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == mu || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(mu)) break;
    mu = next;
    kappa = eval(mu, slope);
    (kappa > 0.0 ? lo : hi) = mu;
    if (++iters > kMaxIters) break;
  }
  if (!(std::abs(kappa) <= 1e-10))
    throw NumericError("prox_h: multiplier search stalled with kappa = " + std::to_string(kappa));

  out.h = w / p.rho;
  out.mu = mu;
  out.kappa = kappa;
  out.iterations = iters;
  return out;
}

Eigen::Matrix3d prox_D(const Eigen::Matrix3d& d_prime, const Eigen::ArrayXd& h, const Grid& grid,
                       const GentleConfig& cfg) {
  if (h.size() != grid.size()) throw ShapeError("prox_D: kernel length does not match the grid");
  const double k = 2.0 * cfg.eps2 * cfg.gamma_d + 1.0;
  const double m = cfg.gamma_d * cfg.lambda * h.sum() / (2.0 * k);
  const Eigen::Matrix3d s = (cfg.gamma_d * cfg.lambda / (2.0 * k)) * grid.weighted_second_moment(h);
  const Eigen::Matrix3d target = 0.5 * (d_prime + d_prime.transpose()) / k - s;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(target);
  Eigen::Vector3d eig;
  for (int i = 0; i < 3; ++i) {
    const double mu = es.eigenvalues()[i];
    const double e = cfg.eps1;
    // Root of d - m / (d + eps1) = mu, written to avoid cancellation for mu << 0.
    const double disc = std::sqrt((mu + e) * (mu + e) + 4.0 * m);
    double d = mu - e >= 0.0 ? 0.5 * (mu - e + disc) : 2.0 * (m + mu * e) / (disc - (mu - e));
    eig[i] = std::max(d, 0.0);
  }
  const Eigen::Matrix3d v = es.eigenvectors();
  Eigen::Matrix3d out = v * eig.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

GentleResult run_gentle(const Volume& y, const Volume& bead, const GentleConfig& cfg,
                        const GentleState& init) {
  require_gentle_shapes(init, y, bead);
  const GentleConfig c = resolve_gentle_config(bead, cfg);
  GentleSolver solver(y, bead, c);
  return solver.run(init);
}

void write_gentle_trace_csv(std::ostream& os, const std::vector<GentleTraceRow>& trace) {
  os << "iter,F,alpha,beta,h_sum,D_eig_min,D_eig_max,step_norm\n";
  const auto prec = os.precision(17);
  for (const auto& r : trace)
    os << r.iter << ',' << r.cost << ',' << r.alpha << ',' << r.beta << ',' << r.h_sum << ','
       << r.d_eig_min << ',' << r.d_eig_max << ',' << r.step_norm << '\n';
  os.precision(prec);
}

Kernel gentle_gaussian_kernel(const GentleState& s, const Grid& grid, double eps1) {
  return gaussian_kernel(s.d + eps1 * Eigen::Matrix3d::Identity(), grid, true);
}

double gaussian_refit_criterion(const GentleState& s, const Volume& y, const Volume& bead,
                                const GentleConfig& cfg) {
  require_same_shape(y, bead, "gaussian_refit_criterion");
  const Kernel g = gentle_gaussian_kernel(s, Grid(bead), cfg.eps1);
  const Volume gx = convolve_circular(bead, g);
  return (y.values() - s.alpha - s.beta * gx.values()).matrix().squaredNorm();
}

LambdaSearchResult lambda_grid_search(const Volume& y, const Volume& bead, const GentleConfig& cfg,
                                      std::vector<double> lambdas,
                                      const std::optional<GentleState>& init) {
  if (lambdas.empty()) throw ConfigError("lambda_grid_search: empty lambda list");
  std::sort(lambdas.begin(), lambdas.end());
  LambdaSearchResult out;
  out.lambdas = lambdas;
  double best = std::numeric_limits<double>::infinity();
  for (double lam : lambdas) {
    GentleConfig c = cfg;
    c.lambda = lam;
    GentleResult r = run_gentle(y, bead, c, init ? *init : default_gentle_init(bead, c));
    const double crit = gaussian_refit_criterion(r.state, y, bead, c);
    out.criteria.push_back(crit);
    if (crit < best || out.criteria.size() == 1) {
      best = crit;
      out.lambda = lam;
      out.best = std::move(r);
    }
  }
  return out;
}

}  // namespace psfdecon
