#include <doctest.h>

#include <fstream>

#include "psfdecon/convolution.hpp"
#include "psfdecon/metrics.hpp"
#include "psfdecon/psf_model.hpp"
#include "psfdecon/volume_io.hpp"
#include "support.hpp"

using namespace psfdecon;
using testing::random_volume;

TEST_CASE("grid is centered with voxel spacing") {
  const Grid g({5, 4, 3}, {0.1, 0.2, 0.3});
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (Index n = 0; n < g.size(); ++n) sum += g.point(n);
  CHECK(sum.norm() < 1e-12);
  for (int a = 0; a < 3; ++a)
    for (Index i = 1; i < g.axis(a).size(); ++i)
      CHECK(g.axis(a)[i] - g.axis(a)[i - 1] == doctest::Approx(g.voxel_um()[a]).epsilon(1e-12));
}

TEST_CASE("volume rejects inconsistent geometry") {
  CHECK_THROWS_AS(Volume({2, 2, 2}, Eigen::Vector3d::Ones(), Eigen::ArrayXd::Zero(7)), ShapeError);
  CHECK_THROWS_AS(Volume({2, 2, 2}, Eigen::Vector3d(1, 0, 1)), ConfigError);
}

TEST_CASE("circular convolution examples") {
  std::mt19937_64 rng(1);
  const Dims d{4, 5, 6};
  const Volume v = random_volume(d, rng);
  CHECK((convolve_circular(v, dirac_kernel(d, v.voxel_um())).values() - v.values()).abs().maxCoeff() < 1e-12);

  const Volume c = v.with_values(Eigen::ArrayXd::Constant(v.size(), 2.5));
  const Volume k = testing::random_simplex(d, rng);
  CHECK((convolve_circular(c, k).values() - 2.5).abs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(convolve_circular(v, Volume({4, 4, 4}, v.voxel_um())), ShapeError);
}

TEST_CASE("circular convolution matches direct summation on random instances") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> side(1, 6);
  for (int t = 0; t < 100; ++t) {
    const Dims d{side(rng), side(rng), side(rng)};
    const Volume v = random_volume(d, rng), k = random_volume(d, rng);
    const double err = (convolve_circular(v, k).values() - testing::direct_circular(v, k).values()).abs().maxCoeff();
    REQUIRE(err < 1e-10);
  }
}

TEST_CASE("circular convolution is linear and preserves totals") {
  std::mt19937_64 rng(3);
  const Dims d{8, 8, 8};
  const Volume u = random_volume(d, rng), w = random_volume(d, rng), k = random_volume(d, rng);
  const double a = 1.7, b = -0.4;
  const Volume lhs = convolve_circular(u.with_values(a * u.values() + b * w.values()), k);
  const Eigen::ArrayXd rhs = a * convolve_circular(u, k).values() + b * convolve_circular(w, k).values();
  CHECK((lhs.values() - rhs).abs().maxCoeff() < 1e-9);
  const double total = convolve_circular(u, k).values().sum();
  CHECK(total == doctest::Approx(u.values().sum() * k.values().sum()).epsilon(1e-9));
}

TEST_CASE("zero-padded convolution") {
  std::mt19937_64 rng(4);
  const Dims d{4, 4, 4};
  const Volume v = random_volume(d, rng);
  CHECK((convolve_zeropad(v, dirac_kernel(d, v.voxel_um())).values() - v.values()).abs().maxCoeff() < 1e-12);

  for (int t = 0; t < 30; ++t) {
    std::uniform_int_distribution<int> side(1, 6);
    const Dims vd{side(rng), side(rng), side(rng)}, kd{side(rng), side(rng), side(rng)};
    const Volume a = random_volume(vd, rng), k = random_volume(kd, rng), ks = random_volume(vd, rng);
    REQUIRE((convolve_zeropad(a, ks).values() - testing::direct_zeropad(a, ks).values()).abs().maxCoeff() < 1e-10);
    REQUIRE((testing::blur(a, k).values() - testing::direct_zeropad(a, k).values()).abs().maxCoeff() < 1e-10);
  }

  // Impulse response: the kernel appears translated, nothing wraps around.
  const Dims big{15, 15, 15};
  const Grid kg({5, 5, 5}, Eigen::Vector3d::Ones());
  const Kernel g = gaussian_kernel(Eigen::Matrix3d::Identity(), kg, true);
  Volume imp(big, Eigen::Vector3d::Ones());
  imp(7, 7, 7) = 1.0;
  const Volume out = testing::blur(imp, g);
  double leak = 0.0, inside = 0.0;
  for (Index k = 0; k < 15; ++k)
    for (Index j = 0; j < 15; ++j)
      for (Index i = 0; i < 15; ++i) {
        const bool in = i >= 5 && i < 10 && j >= 5 && j < 10 && k >= 5 && k < 10;
        if (in) inside = std::max(inside, std::abs(out(i, j, k) - g(i - 5, j - 5, k - 5)));
        else leak = std::max(leak, std::abs(out(i, j, k)));
      }
  CHECK(inside < 1e-12);
  CHECK(leak < 1e-12);

  Volume edge(big, Eigen::Vector3d::Ones());
  edge(0, 7, 7) = 1.0;
  const Volume oe = testing::blur(edge, g);
  CHECK(std::abs(oe(14, 7, 7)) < 1e-12);
}

TEST_CASE("zero-padded operator adjoint") {
  std::mt19937_64 rng(5);
  const Dims d{7, 6, 5};
  const Kernel k = random_volume({3, 4, 5}, rng);
  ConvolutionOperator op(d, k, Boundary::zero);
  const Eigen::ArrayXd u = random_volume(d, rng).values(), w = random_volume(d, rng).values();
  CHECK((op.apply(u) * w).sum() == doctest::Approx((u * op.adjoint(w)).sum()).epsilon(1e-12));
  ConvolutionOperator cop(d, random_volume(d, rng), Boundary::circular);
  CHECK((cop.apply(u) * w).sum() == doctest::Approx((u * cop.adjoint(w)).sum()).epsilon(1e-12));
}

TEST_CASE("dft_max_power") {
  const Dims d{6, 5, 4};
  Volume imp(d, Eigen::Vector3d::Ones());
  imp(2, 1, 3) = 1.0;
  CHECK(dft_max_power(imp) == doctest::Approx(1.0).epsilon(1e-12));
  const Volume one = imp.with_values(Eigen::ArrayXd::Ones(imp.size()));
  CHECK(dft_max_power(one) == doctest::Approx(120.0 * 120.0).epsilon(1e-12));

  const Grid g({8, 8, 8}, {0.1, 0.1, 0.2});
  const Volume sphere = sphere_bead(0.5, g, {0.03, -0.02, 0.05});
  std::mt19937_64 rng(6);
  const Volume noisy = sphere.with_values(sphere.values() + 0.1 * random_volume(g.dims(), rng).values());
  CHECK(dft_max_power(noisy) == doctest::Approx(testing::naive_dft_max_power(noisy)).epsilon(1e-8));
}

TEST_CASE("snr_db") {
  std::mt19937_64 rng(7);
  Volume ref = random_volume({4, 4, 4}, rng);
  CHECK(snr_db(ref, ref) == 300.0);
  ref.values() /= ref.values().matrix().norm();
  CHECK(snr_db(ref, ref.with_values(Eigen::ArrayXd::Zero(ref.size()))) == doctest::Approx(0.0).epsilon(1e-12));

  Eigen::ArrayXd e = random_volume({4, 4, 4}, rng).values();
  e *= std::sqrt(0.1) * ref.values().matrix().norm() / e.matrix().norm();
  CHECK(snr_db(ref, ref.with_values(ref.values() + e)) == doctest::Approx(10.0).epsilon(1e-12));

  double prev = 1e300;
  for (double t : {1e-3, 1e-2, 0.1, 1.0, 10.0}) {
    const double s = snr_db(ref, ref.with_values(ref.values() + t * e));
    CHECK(s < prev);
    prev = s;
  }
  CHECK_THROWS_AS(snr_db(ref, Volume({2, 2, 2}, ref.voxel_um())), ShapeError);
}

TEST_CASE("prd_percent") {
  std::mt19937_64 rng(8);
  const Dims d{16, 16, 16};
  const Volume bead = random_volume(d, rng, 0.0, 1.0);
  const Kernel h = testing::random_simplex(d, rng);
  const BeadModel truth{0.0, 2.0, h};
  CHECK(prd_percent(truth, truth, bead) == 0.0);
  CHECK(prd_percent({0.0, 2.2, h}, truth, bead) == doctest::Approx(10.0).epsilon(1e-12));

  Kernel hp = h;
  hp.values() += 1e-3 * random_volume(d, rng, 0.0, 1.0).values();
  hp.values() /= hp.values().sum();
  const BeadModel est{0.1, 1.9, hp};
  const Eigen::ArrayXd a = est.alpha + est.beta * testing::direct_circular(bead, hp).values();
  const Eigen::ArrayXd b = truth.alpha + truth.beta * testing::direct_circular(bead, h).values();
  const double direct = 100.0 * (a - b).matrix().norm() / b.matrix().norm();
  CHECK(std::abs(prd_percent(est, truth, bead) - direct) < 1e-10);

  const BeadModel zero{0.0, 0.0, h};
  CHECK_THROWS_AS(prd_percent(est, zero, bead), ConfigError);
}

TEST_CASE("volume file round trip and validation") {
  const auto dir = testing::scratch_dir("io");
  std::mt19937_64 rng(9);
  const Volume v = random_volume({3, 4, 5}, rng, -1.0, 1.0, {0.1, 0.2, 0.3}).cast<float>().cast<double>();
  write_volume(v, dir / "v");
  const Volume r = read_volume(dir / "v.f32raw");
  CHECK(r.dims() == v.dims());
  CHECK(r.voxel_um() == v.voxel_um());
  CHECK((r.values() == v.values()).all());

  {
    std::ofstream js(dir / "short.json");
    js << R"({"dims":[2,2,2],"voxel_size_um":[1,1,1],"order":"x-fastest"})";
    std::ofstream raw(dir / "short.f32raw", std::ios::binary);
    const float z[7] = {};
    raw.write(reinterpret_cast<const char*>(z), sizeof z);
  }
  CHECK_THROWS_AS(read_volume(dir / "short"), IoError);
  CHECK_THROWS_AS(read_volume(dir / "missing"), IoError);

  Volume n = v;
  n.values()[17] = std::numeric_limits<double>::quiet_NaN();
  write_volume(n, dir / "nan");
  try {
    read_volume(dir / "nan");
    FAIL("NaN accepted");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("17") != std::string::npos);
  }
  CHECK(std::isnan(read_volume(dir / "nan", {.allow_non_finite = true}).values()[17]));
}
