#include "psfdecon/pmms.hpp"

#include <algorithm>
#include <limits>

namespace psfdecon {

namespace {

Index axis_stride(const Dims& d, int a) { return a == 0 ? 1 : (a == 1 ? d.nx : d.nx * d.ny); }

// Forward difference along one axis; the last difference is zero.
Eigen::ArrayXd diff(const Eigen::ArrayXd& x, const Dims& d, int a) {
  const Index s = axis_stride(d, a);
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(x.size());
  Index n = 0;
  for (Index k = 0; k < d.nz; ++k)
    for (Index j = 0; j < d.ny; ++j)
      for (Index i = 0; i < d.nx; ++i, ++n) {
        const Index c = a == 0 ? i : (a == 1 ? j : k);
        if (c + 1 < d[a]) out[n] = x[n + s] - x[n];
      }
  return out;
}

Eigen::ArrayXd diff_adjoint(const Eigen::ArrayXd& v, const Dims& d, int a) {
  const Index s = axis_stride(d, a);
  Eigen::ArrayXd out(v.size());
  Index n = 0;
  for (Index k = 0; k < d.nz; ++k)
    for (Index j = 0; j < d.ny; ++j)
      for (Index i = 0; i < d.nx; ++i, ++n) {
        const Index c = a == 0 ? i : (a == 1 ? j : k);
        double acc = 0.0;
        if (c > 0) acc += v[n - s];
        if (c + 1 < d[a]) acc -= v[n];
        out[n] = acc;
      }
  return out;
}

struct TvEval {
  Eigen::ArrayXd psi;
  Eigen::ArrayXd diffs[3];
};

TvEval tv_eval(const Eigen::ArrayXd& x, const Dims& d, const Eigen::Vector3d& r, double delta) {
  TvEval t;
  t.psi = Eigen::ArrayXd::Constant(x.size(), delta);
  for (int a = 0; a < 3; ++a) {
    t.diffs[a] = diff(x, d, a);
    t.psi += t.diffs[a].square() / r[a];
  }
  t.psi = t.psi.sqrt();
  return t;
}

Eigen::ArrayXd tv_grad(const TvEval& t, const Dims& d, const Eigen::Vector3d& r) {
  Eigen::ArrayXd g = Eigen::ArrayXd::Zero(t.psi.size());
  for (int a = 0; a < 3; ++a) g += diff_adjoint(t.diffs[a] / (r[a] * t.psi), d, a);
  return g;
}

// A_g d
Eigen::ArrayXd tv_curv(const Eigen::ArrayXd& psi, const Eigen::ArrayXd& dv, const Dims& d,
                       const Eigen::Vector3d& r) {
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(dv.size());
  for (int a = 0; a < 3; ++a) out += diff_adjoint(diff(dv, d, a) / (r[a] * psi), d, a);
  return out;
}

void check_problem(const RestorationProblem& p) {
  if (p.w.size() != p.y.size()) throw ShapeError("restoration: weight length mismatch");
  if (!(p.w > 0.0).all() || !p.w.allFinite()) throw ConfigError("restoration: weights must be positive");
  if (!(p.bound > 0.0)) throw ConfigError("restoration: bound must be positive");
  if (!(p.delta > 0.0)) throw ConfigError("restoration: delta must be positive");
}

ConvolutionOperator make_h(const RestorationProblem& p) {
  return ConvolutionOperator(p.y.dims(), p.h, p.boundary);
}

// W (Hx - y + alpha)
Eigen::ArrayXd weighted_residual(ConvolutionOperator& h, const Volume& x, const RestorationProblem& p) {
  require_same_shape(x, p.y, "restoration");
  return p.w * (h.apply(x.values()) - p.y.values() + p.alpha);
}

}  // namespace

Eigen::ArrayXd heteroscedastic_weights(const Volume& y, double alpha, const NoiseParams& noise,
                                       int smooth) {
  const Volume ys = box_smooth(y, smooth);
  const double floor = std::max(std::sqrt(std::max(noise.b, 0.0)), 1e-8);
  return 1.0 / sigma(ys.values() - alpha, noise).max(floor);
}

RestorationProblem make_restoration_problem(const Volume& y, const Kernel& h, double alpha,
                                            const NoiseParams& noise, const RestorationOptions& opts) {
  RestorationProblem p;
  p.y = y;
  p.h = h;
  p.alpha = alpha;
  p.w = heteroscedastic_weights(y, alpha, noise, opts.weight_smooth);
  p.bound = opts.bound > 0.0 ? opts.bound : static_cast<double>(y.size());
  p.delta = opts.delta;
  p.boundary = opts.boundary;
  check_problem(p);
  return p;
}

double reg_g(const Volume& x, double delta) {
  if (!(delta > 0.0)) throw ConfigError("reg_g: delta must be positive");
  return tv_eval(x.values(), x.dims(), x.voxel_um(), delta).psi.sum();
}

Volume grad_g(const Volume& x, double delta) {
  if (!(delta > 0.0)) throw ConfigError("grad_g: delta must be positive");
  const TvEval t = tv_eval(x.values(), x.dims(), x.voxel_um(), delta);
  return x.with_values(tv_grad(t, x.dims(), x.voxel_um()));
}

double data_fidelity_f(const Volume& x, const RestorationProblem& p) {
  ConvolutionOperator h = make_h(p);
  return weighted_residual(h, x, p).matrix().squaredNorm();
}

double penalty_R1(const Volume& x, const RestorationProblem& p) {
  ConvolutionOperator h = make_h(p);
  const double nv = weighted_residual(h, x, p).matrix().norm();
  const double excess = std::max(nv - std::sqrt(p.bound), 0.0);
  return excess * excess;
}

Volume grad_R1(const Volume& x, const RestorationProblem& p) {
  ConvolutionOperator h = make_h(p);
  const Eigen::ArrayXd v = weighted_residual(h, x, p);
  const double nv = v.matrix().norm();
  const double excess = std::max(nv - std::sqrt(p.bound), 0.0);
  if (excess == 0.0) return x.with_values(Eigen::ArrayXd::Zero(x.size()));
  return x.with_values(2.0 * h.adjoint(p.w * v * (excess / nv)));
}

double penalty_R2(const Volume& x) { return x.values().min(0.0).square().sum(); }

Volume grad_R2(const Volume& x) { return x.with_values(2.0 * x.values().min(0.0)); }

Volume curvature_apply(const Volume& x, const Volume& d, double gamma, const RestorationProblem& p) {
  require_same_shape(x, d, "curvature_apply");
  require_same_shape(x, p.y, "curvature_apply");
  const TvEval t = tv_eval(x.values(), x.dims(), x.voxel_um(), p.delta);
  ConvolutionOperator h = make_h(p);
  Eigen::ArrayXd out = tv_curv(t.psi, d.values(), x.dims(), x.voxel_um());
  out += gamma * (2.0 * h.adjoint(p.w.square() * h.apply(d.values())) + 2.0 * d.values());
  return x.with_values(out);
}

double penalized_objective(const Volume& x, double gamma, const RestorationProblem& p) {
  return reg_g(x, p.delta) + gamma * (penalty_R1(x, p) + penalty_R2(x));
}

Volume penalized_gradient(const Volume& x, double gamma, const RestorationProblem& p) {
  return x.with_values(grad_g(x, p.delta).values() +
                       gamma * (grad_R1(x, p).values() + grad_R2(x).values()));
}

RestorationObjective::RestorationObjective(const RestorationProblem& p, Mode mode)
    : p_(p), mode_(mode), h_(make_h(p)) {
  check_problem(p);
}

void RestorationObjective::reset(const Eigen::ArrayXd& x) {
  if (x.size() != p_.y.size()) throw ShapeError("RestorationObjective: length mismatch");
  x_ = x;
  hx_ = h_.apply(x_);
  last_step_.resize(0);
  moves_ = 0;
  evaluate();
}

void RestorationObjective::evaluate() {
  const Dims& d = p_.y.dims();
  const Eigen::Vector3d& r = p_.y.voxel_um();
  const TvEval t = tv_eval(x_, d, r, p_.delta);
  psi_ = t.psi;
  terms_.g = psi_.sum();
  const double tv_weight = mode_ == Mode::constrained ? 1.0 : chi_;
  grad_ = tv_weight * tv_grad(t, d, r);

  const Eigen::ArrayXd v = p_.w * (hx_ - p_.y.values() + p_.alpha);
  const double nv2 = v.matrix().squaredNorm();
  terms_.f = nv2;
  const Eigen::ArrayXd neg = x_.min(0.0);
  terms_.r2 = neg.square().sum();
  grad_ += gamma_ * 2.0 * neg;

  if (mode_ == Mode::constrained) {
    const double nv = std::sqrt(nv2);
    const double excess = std::max(nv - std::sqrt(p_.bound), 0.0);
    terms_.r1 = excess * excess;
    if (excess > 0.0) grad_ += gamma_ * 2.0 * h_.adjoint(p_.w * v * (excess / nv));
    value_ = terms_.g + gamma_ * (terms_.r1 + terms_.r2);
  } else {
    terms_.r1 = 0.0;
    grad_ += 2.0 * h_.adjoint(p_.w * v);
    value_ = nv2 + chi_ * terms_.g + gamma_ * terms_.r2;
  }
}

Eigen::MatrixXd RestorationObjective::curvature(const std::vector<Eigen::ArrayXd>& dirs) {
  const Dims& d = p_.y.dims();
  const Eigen::Vector3d& r = p_.y.voxel_um();
  const Index k = static_cast<Index>(dirs.size());
  dirs_ = dirs;
  hdirs_.clear();
  std::vector<Eigen::ArrayXd> wh, gdiffs[3];
  for (const auto& dir : dirs) {
    const bool reuse = last_step_.size() == dir.size() && (last_step_ == dir).all();
    hdirs_.push_back(reuse ? last_hstep_ : h_.apply(dir));
    wh.push_back(p_.w * hdirs_.back());
    for (int a = 0; a < 3; ++a) gdiffs[a].push_back(diff(dir, d, a) / (r[a] * psi_).sqrt());
  }
  const double tv_weight = mode_ == Mode::constrained ? 1.0 : chi_;
  const double data_weight = mode_ == Mode::constrained ? gamma_ : 1.0;
  Eigen::MatrixXd b(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = i; j < k; ++j) {
      double tv = 0.0;
      for (int a = 0; a < 3; ++a) tv += (gdiffs[a][i] * gdiffs[a][j]).sum();
      const double data = 2.0 * (wh[i] * wh[j]).sum();
      const double box = 2.0 * (dirs[i] * dirs[j]).sum();
      b(i, j) = b(j, i) = tv_weight * tv + data_weight * data + gamma_ * box;
    }
  return b;
}

void RestorationObjective::move(const Eigen::VectorXd& u) {
  if (static_cast<size_t>(u.size()) != dirs_.size())
    throw ShapeError("RestorationObjective::move: step does not match the directions");
  last_step_ = Eigen::ArrayXd::Zero(x_.size());
  last_hstep_ = Eigen::ArrayXd::Zero(x_.size());
  for (Index i = 0; i < u.size(); ++i) {
    last_step_ += u[i] * dirs_[i];
    last_hstep_ += u[i] * hdirs_[i];
  }
  x_ += last_step_;
  if (++moves_ % 50 == 0) {
    hx_ = h_.apply(x_);
    last_hstep_.resize(0);
    last_step_.resize(0);
  } else {
    hx_ += last_hstep_;
  }
  evaluate();
}

Eigen::VectorXd subspace_step(const Eigen::MatrixXd& b_mat, const Eigen::VectorXd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (b_mat + b_mat.transpose()));
  const double floor = 1e-12 * std::abs(b_mat.trace());
  Eigen::VectorXd coef = es.eigenvectors().transpose() * b;
  for (Index i = 0; i < coef.size(); ++i) {
    const double ev = es.eigenvalues()[i];
    coef[i] = ev > floor && ev > 0.0 ? -coef[i] / ev : 0.0;
  }
  return es.eigenvectors() * coef;
}

InnerResult mm_inner_solve(const Volume& x_init, double gamma, double eps, const RestorationProblem& p,
                           int max_inner) {
  if (!(eps > 0.0)) throw ConfigError("mm_inner_solve: eps must be positive");
  require_same_shape(x_init, p.y, "mm_inner_solve");
  RestorationObjective obj(p, RestorationObjective::Mode::constrained);
  obj.set_gamma(gamma);
  return mm_subspace_solve(obj, x_init.values(), eps, max_inner);
}

PenaltySchedule simulation_schedule() { return {}; }

PenaltySchedule real_data_schedule() {
  PenaltySchedule s;
  s.gamma_scale = 1.5;
  s.gamma_power = 1.2;
  s.eps_power = 0.5;
  return s;
}

PmmsResult pmms_run(const RestorationProblem& p, const PenaltySchedule& schedule, const Volume* x0) {
  check_problem(p);
  if (schedule.max_outer < 1 || schedule.max_inner < 0)
    throw ConfigError("pmms_run: schedule needs max_outer >= 1 and max_inner >= 0");
  if (x0) require_same_shape(*x0, p.y, "pmms_run");
  RestorationObjective obj(p, RestorationObjective::Mode::constrained);
  Eigen::ArrayXd x = x0 ? x0->values() : p.y.values();
  PmmsResult out;
  double prev_gamma = 0.0;
  for (int j = 1; j <= schedule.max_outer; ++j) {
    const double gamma = schedule.gamma(j);
    const double eps = schedule.eps(j);
    if (!(gamma > 0.0) || gamma < prev_gamma || !(eps > 0.0))
      throw ConfigError("pmms_run: gamma must be positive and nondecreasing, eps positive");
    prev_gamma = gamma;
    obj.set_gamma(gamma);
    InnerResult r = mm_subspace_solve(obj, x, eps, schedule.max_inner);
    x = std::move(r.x);
    const auto& t = obj.terms();
    out.log.push_back({j, gamma, eps, r.iterations, r.value, t.g, t.f, t.r1, t.r2, r.grad_norm,
                       x.minCoeff()});
  }
  out.x = p.y.with_values(x);
  return out;
}

void write_pmms_log_csv(std::ostream& os, const std::vector<PmmsLogRow>& log) {
  const auto prec = os.precision(17);
  os << "outer,gamma,eps,inner_iterations,F_gamma,g,f,R1,R2,grad_norm,min_x\n";
  for (const auto& r : log)
    os << r.outer << ',' << r.gamma << ',' << r.eps << ',' << r.inner_iterations << ',' << r.f_gamma
       << ',' << r.g << ',' << r.f << ',' << r.r1 << ',' << r.r2 << ',' << r.grad_norm << ','
       << r.min_x << '\n';
  os.precision(prec);
}

}  // namespace psfdecon
