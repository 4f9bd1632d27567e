#include <doctest.h>

#include <numbers>
#include <sstream>

#include "psfdecon/baselines.hpp"
#include "psfdecon/metrics.hpp"
#include "psfdecon/psf_model.hpp"
#include "support.hpp"

using namespace psfdecon;

namespace {

struct NlsProblem {
  Volume bead;
  Volume y;
  NlsParams truth;
};

NlsProblem nls_problem() {
  const Grid g({14, 14, 18}, {0.1, 0.1, 0.2});
  NlsProblem p;
  p.bead = sphere_bead(0.6, g);
  p.truth.alpha = 0.1;
  p.truth.beta = 1.2;
  p.truth.theta = 0.7;
  p.truth.phi = 0.4;
  p.truth.s = {40.0, 25.0, 6.0};
  p.y = p.bead.with_values(p.truth.alpha +
                           p.truth.beta * convolve_circular(p.bead, nls_kernel(p.truth, g)).values());
  return p;
}

double model_prd(const NlsParams& est, const NlsProblem& p) {
  const Grid g(p.bead);
  return prd_percent({est.alpha, est.beta, nls_kernel(est, g)}, {p.truth.alpha, p.truth.beta, nls_kernel(p.truth, g)},
                     p.bead);
}

}  // namespace

TEST_CASE("Richardson-Lucy") {
  std::mt19937_64 rng(1);
  const Eigen::Vector3d voxel(0.1, 0.1, 0.2);
  const Dims d{10, 9, 8};
  SUBCASE("Dirac kernel keeps y") {
    const Volume y = testing::random_volume(d, rng, 0.1, 1.0, voxel);
    const Volume x = richardson_lucy(y, dirac_kernel({3, 3, 3}, voxel), {1, 0.0, Boundary::zero});
    CHECK((x.values() - y.values()).abs().maxCoeff() < 1e-9);
  }
  SUBCASE("flat observation is a fixed point under circular boundaries") {
    const Volume y = Volume(d, voxel).with_values(Eigen::ArrayXd::Constant(d.count(), 2.5));
    const Kernel h = testing::random_simplex(d, rng);
    const Volume x = richardson_lucy(y, h.with_values(h.values()), {10, 0.0, Boundary::circular});
    CHECK((x.values() - 2.5).abs().maxCoeff() < 1e-9);
  }
  SUBCASE("flux is conserved under circular boundaries, iterates stay nonnegative") {
    const Volume y = testing::random_volume(d, rng, 0.0, 1.0, voxel);
    const Kernel h = testing::random_simplex(d, rng);
    for (int it : {1, 5, 20}) {
      const Volume x = richardson_lucy(y, h, {it, 0.0, Boundary::circular});
      CHECK(x.values().sum() == doctest::Approx(y.values().sum()).epsilon(1e-6));
      CHECK(x.values().minCoeff() >= 0.0);
    }
  }
  SUBCASE("negative samples are clipped") {
    Volume y = testing::random_volume(d, rng, -0.2, 1.0, voxel);
    const Volume x = richardson_lucy(y, gaussian_kernel(Eigen::Matrix3d::Identity() * 100, Grid({5, 5, 5}, voxel), true));
    CHECK(x.values().allFinite());
    CHECK(x.values().minCoeff() >= 0.0);
  }
  CHECK(RlOptions{}.iters == 50);
  CHECK_THROWS_AS(richardson_lucy(Volume(d, voxel), dirac_kernel({1, 1, 1}, voxel), {-1}), ConfigError);
}

TEST_CASE("NLS parameter packing") {
  NlsParams p;
  p.alpha = 0.2;
  p.beta = 1.5;
  p.theta = 0.3;
  p.phi = -0.8;
  p.s = {1.0, 2.0, 3.0};
  const NlsParams q = NlsParams::unpack(p.pack());
  CHECK((q.pack() - p.pack()).norm() == 0.0);
  const Eigen::Matrix3d s = p.precision();
  CHECK(is_spd(s));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s);
  CHECK(es.eigenvalues()[0] == doctest::Approx(1.0));
  CHECK(es.eigenvalues()[2] == doctest::Approx(3.0));
}

TEST_CASE("NLS on noise-free data") {
  const NlsProblem p = nls_problem();
  SUBCASE("started at the truth stays there") {
    const NlsResult r = nls_fit(p.y, p.bead, p.truth);
    CHECK(model_prd(r.params, p) < 1e-4);
  }
  SUBCASE("recovers from a 10% perturbation") {
    NlsParams init = p.truth;
    init.alpha *= 1.1;
    init.beta *= 0.9;
    init.theta *= 1.1;
    init.phi *= 0.9;
    init.s = p.truth.s.cwiseProduct(Eigen::Vector3d(1.1, 0.9, 1.1));
    const NlsResult r = nls_fit(p.y, p.bead, init);
    CHECK(model_prd(r.params, p) < 1.0);
    for (size_t k = 1; k < r.residual_norms.size(); ++k)
      CHECK(r.residual_norms[k] <= r.residual_norms[k - 1] * (1 + 1e-12));
    CHECK(r.params.s.minCoeff() > 0.0);
  }
}

TEST_CASE("log_spaced") {
  const auto v = log_spaced(1e-6, 1e-1, 6);
  REQUIRE(v.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(v[i] == doctest::Approx(std::pow(10.0, -6 + i)));
  CHECK(log_spaced(2.0, 2.0, 1).front() == doctest::Approx(2.0));
  CHECK_THROWS(log_spaced(0.0, 1.0, 3));
}

TEST_CASE("penalized restoration") {
  std::mt19937_64 rng(2);
  const Eigen::Vector3d voxel(0.1, 0.1, 0.2);
  const Dims d{10, 10, 8};
  const Volume truth = testing::random_volume(d, rng, 0.0, 1.0, voxel);
  const Kernel h = gaussian_kernel(Eigen::Vector3d(100.0, 100.0, 25.0).asDiagonal().toDenseMatrix(),
                                   Grid({5, 5, 3}, voxel), true);
  Volume y = testing::blur(truth, h);
  y.values() += 0.02 * testing::random_volume(d, rng).values();
  PenalizedOptions o;
  o.iters = 200;
  const PenalizedResult r = penalized_restore(y, h, 0.0, 1e-4, o);
  CHECK(r.iterations > 0);
  CHECK(r.iterations <= o.iters);
  CHECK(r.x.values().minCoeff() > -0.05);
  const double before = (testing::blur(y, h).values() - y.values()).matrix().squaredNorm();
  const double after = (testing::blur(r.x, h).values() - y.values()).matrix().squaredNorm();
  CHECK(after < before);
}

TEST_CASE("sweep CSV") {
  std::ostringstream os;
  write_sweep_csv(os, {{1e-3, 4.5, 100, 0.25}});
  CHECK(os.str().rfind("chi,snr_db,iterations,runtime_s\n0.001,4.5,100,0.25", 0) == 0);
}
