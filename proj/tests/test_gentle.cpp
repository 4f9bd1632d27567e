#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "psfdecon/gentle.hpp"
#include "psfdecon/lambert_w.hpp"
#include "psfdecon/metrics.hpp"
#include "psfdecon/psf_model.hpp"
#include "support.hpp"

using namespace psfdecon;

namespace {

struct Problem {
  Volume bead;
  Volume y;
  GentleState truth;
  GentleConfig cfg;
};

// Small bead problem with a Gaussian kernel; noise level relative to the peak.
Problem small_problem(std::uint64_t seed, double noise, double lambda = 10.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Grid g({12, 12, 16}, {0.1, 0.1, 0.2});
  Problem p;
  p.bead = sphere_bead(0.6, g);
  EulerDecomp e;
  e.theta = std::numbers::pi * u(rng);
  e.phi = std::numbers::pi * (u(rng) - 0.5);
  e.eigs = {30.0 + 20.0 * u(rng), 30.0 + 20.0 * u(rng), 5.0 + 5.0 * u(rng)};
  const Eigen::Matrix3d s = spd_from_euler(e);
  p.truth.alpha = 0.1 + 0.2 * u(rng);
  p.truth.beta = 0.5 + u(rng);
  p.truth.h = gaussian_kernel(s, g, true);
  p.truth.d = s - 1e-6 * Eigen::Matrix3d::Identity();
  const Eigen::ArrayXd clean = p.truth.alpha + p.truth.beta * convolve_circular(p.bead, p.truth.h).values();
  p.y = p.bead.with_values(clean + noise * clean.maxCoeff() * testing::random_volume(g.dims(), rng).values());
  p.cfg.lambda = lambda;
  p.cfg = resolve_gentle_config(p.bead, p.cfg);
  return p;
}

// Independent evaluation of the objective: direct-sum convolution, explicit
// grid, eigenvalues of D for the barrier.
double cost_oracle(const GentleState& s, const Volume& y, const Volume& x, const GentleConfig& cfg) {
  const Volume xh = testing::direct_circular(x, s.h);
  double data = 0.0;
  for (Index n = 0; n < y.size(); ++n) {
    const double r = y.values()[n] - s.alpha - s.beta * xh.values()[n];
    data += 0.5 * r * r;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s.d);
  double phi = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double t = es.eigenvalues()[i];
    phi += t >= 0.0 ? -std::log(t + cfg.eps1)
                    : -std::log(cfg.eps1) - t / cfg.eps1 + t * t / (cfg.eps1 * cfg.eps1);
  }
  const Dims& d = x.dims();
  const Eigen::Vector3d r = x.voxel_um();
  const Eigen::Matrix3d p = s.d + cfg.eps1 * Eigen::Matrix3d::Identity();
  double kl = 0.0;
  for (Index k = 0; k < d.nz; ++k)
    for (Index j = 0; j < d.ny; ++j)
      for (Index i = 0; i < d.nx; ++i) {
        const Eigen::Vector3d w((i - (d.nx - 1) / 2.0) * r[0], (j - (d.ny - 1) / 2.0) * r[1],
                                (k - (d.nz - 1) / 2.0) * r[2]);
        const double h = s.h(i, j, k);
        kl += (h > 0 ? h * std::log(h) : 0.0) - h * std::log(cfg.zeta) +
              0.5 * h * (3.0 * std::log(2.0 * std::numbers::pi) + phi + w.dot(p * w));
      }
  return data + cfg.lambda * kl + cfg.eps2 * s.d.squaredNorm();
}

}  // namespace

TEST_CASE("cost_F examples") {
  std::mt19937_64 rng(21);
  const Dims dims{8, 8, 8};
  const Grid g(dims, {0.1, 0.1, 0.2});
  const Volume x = sphere_bead(0.5, g);
  GentleConfig cfg;
  cfg.zeta = g.voxel_volume();

  GentleState s;
  s.alpha = 0.2;
  s.beta = 1.5;
  s.h = testing::random_simplex(dims, rng);
  const Volume y = x.with_values(s.alpha + s.beta * convolve_circular(x, s.h).values());

  cfg.lambda = 0.0;
  CHECK(cost_F(s, y, x, cfg) == doctest::Approx(0.0).scale(1e-12));

  GentleState neg = s;
  neg.h.values()[3] = -1e-3;
  neg.h.values()[4] += 1e-3;
  CHECK(std::isinf(cost_F(neg, y, x, cfg)));
  GentleState out_of_box = s;
  out_of_box.beta = 3.5;
  CHECK(std::isinf(cost_F(out_of_box, y, x, cfg)));

  for (int t = 0; t < 5; ++t) {
    GentleState r;
    r.alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    r.beta = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    r.h = testing::random_simplex(dims, rng);
    Eigen::Matrix3d a = Eigen::Matrix3d::Random();
    r.d = a * a.transpose() * 10.0;
    const Volume yr = testing::random_volume(dims, rng, 0.0, 1.0, x.voxel_um());
    cfg.lambda = 0.7;
    CHECK(cost_F(r, yr, x, cfg) == doctest::Approx(cost_oracle(r, yr, x, cfg)).epsilon(1e-10));
  }
}

TEST_CASE("alpha and beta updates") {
  std::mt19937_64 rng(22);
  const Dims dims{6, 6, 6};
  const Grid g(dims, {0.1, 0.1, 0.1});
  const Volume x = sphere_bead(0.4, g);
  GentleConfig cfg;
  GentleState s;
  s.h = testing::random_simplex(dims, rng);
  s.beta = 0.0;
  CHECK(update_alpha(s, x.with_values(Eigen::ArrayXd::Constant(x.size(), 0.3)), x, cfg) ==
        doctest::Approx(0.3));
  CHECK(update_alpha(s, x.with_values(Eigen::ArrayXd::Constant(x.size(), 5.0)), x, cfg) == 1.0);

  s.alpha = 0.25;
  const Eigen::ArrayXd xh = convolve_circular(x, s.h).values();
  CHECK(update_beta(s, x.with_values(0.25 + 2.0 * xh), x, cfg) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(update_beta(s, x.with_values(0.25 + 5.0 * xh), x, cfg) == 3.0);

  GentleState zero = s;
  zero.h = Volume(dims, x.voxel_um());
  CHECK_THROWS_AS(update_beta(zero, x, x, cfg), NumericError);

  cfg.zeta = g.voxel_volume();
  for (int t = 0; t < 10; ++t) {
    const Volume y = testing::random_volume(dims, rng, 0.0, 2.0, x.voxel_um());
    GentleState r = s;
    r.h = testing::random_simplex(dims, rng);
    r.beta = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    auto fa = [&](double a) {
      GentleState q = r;
      q.alpha = a;
      return cost_F(q, y, x, cfg);
    };
    CHECK(std::abs(update_alpha(r, y, x, cfg) - testing::golden_section(fa, cfg.alpha_min, cfg.alpha_max)) < 1e-6);
    r.alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto fb = [&](double b) {
      GentleState q = r;
      q.beta = b;
      return cost_F(q, y, x, cfg);
    };
    CHECK(std::abs(update_beta(r, y, x, cfg) - testing::golden_section(fb, cfg.beta_min, cfg.beta_max)) < 1e-6);
  }
}

TEST_CASE("lambert W near the asymptotic switch") {
  CHECK(lambert_w(0.0) == 0.0);
  CHECK(lambert_w(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  const double w = lambert_w_of_exp(150.0);
  CHECK(std::abs(w + std::log(w) - 150.0) < 1e-3);
  const double below = lambert_w_of_exp(std::nextafter(kLambertAsymptoticSwitch, 0.0));
  const double above = lambert_w_of_exp(std::nextafter(kLambertAsymptoticSwitch, 1e9));
  CHECK(std::abs(above - below) / below < 1e-6);
  CHECK_THROWS_AS(lambert_w(-0.1), ConfigError);
}

TEST_CASE("prox_h") {
  SUBCASE("symmetric input gives the uniform distribution") {
    EntropicProxProblem p;
    p.hprime = Eigen::ArrayXd::Constant(20, 0.05);
    p.c = Eigen::ArrayXd::Constant(20, 1.3);
    p.rho = 4.0;
    const auto r = prox_h(p);
    CHECK((r.h - 0.05).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("matches the simplex grid oracle for N = 3") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
      EntropicProxProblem p;
      p.hprime = Eigen::Array3d(u(rng), u(rng), u(rng)) - 0.3;
      p.c = 3.0 * Eigen::Array3d(u(rng), u(rng), u(rng));
      p.rho = std::pow(10.0, -1.0 + 2.0 * u(rng));
      p.log_zeta = std::log(0.1 + u(rng));
      const auto r = prox_h(p);
      const Eigen::Array3d o = testing::prox_h_grid_oracle(p.hprime, p.c, 1.0 / p.rho, p.log_zeta);
      CHECK((r.h - o).abs().maxCoeff() < 1e-3);
    }
  }
  SUBCASE("KKT identity and positivity") {
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
      EntropicProxProblem p;
      p.hprime = Eigen::ArrayXd::NullaryExpr(200, [&] { return u(rng) - 0.4; }) * 0.02;
      p.c = Eigen::ArrayXd::NullaryExpr(200, [&] { return 20.0 * u(rng); });
      p.rho = std::pow(10.0, 4.0 * u(rng));
      p.log_zeta = std::log(1e-3);
      const auto r = prox_h(p);
      CHECK(std::abs(r.h.sum() - 1.0) < 1e-10);
      CHECK((r.h > 0.0).all());
      const Eigen::ArrayXd w = -1.0 - p.c + p.rho * (p.hprime - r.mu) + p.log_zeta;
      const Eigen::ArrayXd resid = r.h.log() + p.rho * r.h - w;
      CHECK(resid.abs().maxCoeff() < 1e-8);
    }
  }
  SUBCASE("vanishing regularization returns h'") {
    std::mt19937_64 rng(25);
    Eigen::ArrayXd hp = testing::random_simplex({4, 4, 4}, rng).values();
    EntropicProxProblem p;
    p.hprime = hp;
    p.c = Eigen::ArrayXd::NullaryExpr(hp.size(), [&] { return std::uniform_real_distribution<double>(0, 5)(rng); });
    p.rho = 1e8;
    CHECK((prox_h(p).h - hp).abs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("prox_D") {
  SUBCASE("diagonal input on a symmetric grid stays diagonal") {
    const Grid g({7, 7, 9}, {0.1, 0.1, 0.2});
    const Kernel h = gaussian_kernel(Eigen::Vector3d(40, 60, 10).asDiagonal(), g, true);
    GentleConfig cfg;
    cfg.lambda = 3.0;
    cfg.gamma_d = 2.0;
    const Eigen::Matrix3d out = prox_D(Eigen::Vector3d(5, -2, 30).asDiagonal(), h.values(), g, cfg);
    Eigen::Matrix3d off = out;
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("matches the multi-start numeric prox oracle") {
    std::mt19937_64 rng(26);
    for (int t = 0; t < 10; ++t) {
      const auto in = testing::random_prox_d_instance(rng);
      const Eigen::Matrix3d closed = prox_D(in.d_prime, in.h, in.grid, in.cfg);
      const auto obj = in.objective();
      const Eigen::Matrix3d numeric = testing::prox_d_numeric_oracle(obj, rng);
      CHECK((closed - numeric).norm() < 1e-5);
      CHECK(obj.value(closed) <= obj.value(numeric) + 1e-8);
      CHECK((closed - closed.transpose()).norm() == 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(closed);
      CHECK(es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()));
    }
  }
  SUBCASE("vanishing step projects onto the shifted cone") {
    std::mt19937_64 rng(27);
    for (int t = 0; t < 5; ++t) {
      auto in = testing::random_prox_d_instance(rng);
      in.cfg.gamma_d = 1e-8;
      in.cfg.eps1 = 1e-6;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(in.d_prime);
      const Eigen::Matrix3d proj = es.eigenvectors() * es.eigenvalues().cwiseMax(-in.cfg.eps1).asDiagonal() *
                                   es.eigenvectors().transpose();
      CHECK((prox_D(in.d_prime, in.h, in.grid, in.cfg) - proj).norm() < 1e-5);
    }
  }
}

TEST_CASE("run_gentle descent and feasibility on random problems") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Problem p = small_problem(seed, 0.05, std::pow(10.0, static_cast<double>(seed % 4)));
    p.cfg.max_iters = 60;
    const GentleResult r = run_gentle(p.y, p.bead, p.cfg, default_gentle_init(p.bead, p.cfg));
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& row : r.trace) {
      CHECK(row.cost <= prev + 1e-9 * std::max(1.0, std::abs(prev)));
      prev = row.cost;
      CHECK(std::abs(row.h_sum - 1.0) < 1e-10);
      CHECK(row.d_eig_min >= -1e-12 * std::max(1.0, row.d_eig_max));
      CHECK(row.alpha >= p.cfg.alpha_min);
      CHECK(row.alpha <= p.cfg.alpha_max);
      CHECK(row.beta >= p.cfg.beta_min);
      CHECK(row.beta <= p.cfg.beta_max);
      CHECK(row.d_eig_max < 1e8);
    }
    CHECK((r.state.h.values() > 0.0).all());
  }
}

TEST_CASE("run_gentle recovers noise-free Gaussian data from near the truth") {
  Problem p = small_problem(31, 0.0, 100.0);
  p.cfg.max_iters = 300;
  GentleState init = p.truth;
  init.d *= 1.1;
  init.alpha *= 0.9;
  const GentleResult r = run_gentle(p.y, p.bead, p.cfg, init);
  const double prd = prd_percent({r.state.alpha, r.state.beta, r.state.h},
                                 {p.truth.alpha, p.truth.beta, p.truth.h}, p.bead);
  CHECK(prd < 5.0);
}

TEST_CASE("run_gentle on a flat image drives beta to zero") {
  Problem p = small_problem(32, 0.0);
  p.y.values().setConstant(0.4);
  p.cfg.max_iters = 50;
  const GentleResult r = run_gentle(p.y, p.bead, p.cfg, default_gentle_init(p.bead, p.cfg));
  CHECK(r.state.beta == doctest::Approx(0.0).scale(1e-9));
  CHECK(r.state.alpha == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("configuration checks") {
  const Problem p = small_problem(33, 0.0);
  GentleConfig cfg;
  cfg.gamma_h = 2.0 / gentle_lipschitz(p.bead, cfg);
  CHECK_THROWS_AS(resolve_gentle_config(p.bead, cfg), ConfigError);
  GentleConfig ok = resolve_gentle_config(p.bead, GentleConfig{});
  CHECK(ok.zeta == doctest::Approx(p.bead.voxel_um().prod()));
  CHECK(ok.gamma_h == doctest::Approx(1.9 / gentle_lipschitz(p.bead, ok)));
}

TEST_CASE("lambda grid search") {
  Problem p = small_problem(34, 0.02, 1.0);
  p.cfg.max_iters = 200;
  const auto single = lambda_grid_search(p.y, p.bead, p.cfg, {7.0});
  CHECK(single.lambda == 7.0);
  CHECK(single.lambdas.size() == 1);

  const auto pair = lambda_grid_search(p.y, p.bead, p.cfg, {1e6, 1.0});
  CHECK(pair.lambda == 1.0);

  GentleConfig frozen = p.cfg;
  frozen.max_iters = 0;
  CHECK(lambda_grid_search(p.y, p.bead, frozen, {3.0, 1.0, 2.0}).lambda == 1.0);
}

TEST_CASE("trace CSV header") {
  std::ostringstream os;
  write_gentle_trace_csv(os, {{1, 2.0, 0.1, 1.0, 1.0, 0.0, 3.0, 0.5}});
  CHECK(os.str().rfind("iter,F,alpha,beta,h_sum,D_eig_min,D_eig_max,step_norm\n", 0) == 0);
}
