#include "psfdecon/psf_model.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace psfdecon {

namespace {

void require_spd(const Eigen::Matrix3d& s, const char* what) {
  if (!is_spd(s)) throw ConfigError(std::string(what) + ": matrix is not symmetric positive definite");
}

}  // namespace

Kernel gaussian_kernel(const Eigen::Matrix3d& precision, const Grid& grid, bool normalize) {
  require_spd(precision, "gaussian_kernel");
  Eigen::ArrayXd v = (-0.5 * grid.quadratic_form(precision)).exp();
  if (normalize) {
    v /= v.sum();
  } else {
    const double two_pi = 2.0 * std::numbers::pi;
    v *= std::sqrt(precision.determinant() / (two_pi * two_pi * two_pi));
  }
  return Kernel(grid.dims(), grid.voxel_um(), std::move(v));
}

Kernel genexp_kernel(const Eigen::Matrix3d& shape, double eta, const Grid& grid) {
  require_spd(shape, "genexp_kernel");
  if (!(eta > 0.0)) throw ConfigError("genexp_kernel: eta must be positive");
  const double half_eta = 0.5 * eta;
  Eigen::ArrayXd v = grid.quadratic_form(shape).max(0.0).pow(half_eta);
  v = (-0.5 * v).exp();
  v /= v.sum();
  return Kernel(grid.dims(), grid.voxel_um(), std::move(v));
}

Volume sphere_bead(double diameter_um, const Grid& grid, const Eigen::Vector3d& center_um) {
  if (!(diameter_um > 0.0)) throw ConfigError("sphere_bead: diameter must be positive");
  const double radius = 0.5 * diameter_um;
  for (int a = 0; a < 3; ++a) {
    const double half_extent = 0.5 * static_cast<double>(grid.dims()[a]) * grid.voxel_um()[a];
    if (radius + std::abs(center_um[a]) >= half_extent)
      throw ConfigError("sphere_bead: bead of diameter " + std::to_string(diameter_um) +
                        " um does not fit the grid along axis " + std::to_string(a));
  }
  Volume x(grid.dims(), grid.voxel_um());
  const double r2 = radius * radius;
  const Dims& d = grid.dims();
  for (Index k = 0; k < d.nz; ++k)
    for (Index j = 0; j < d.ny; ++j)
      for (Index i = 0; i < d.nx; ++i) {
        const Eigen::Vector3d w = grid.point(i, j, k) - center_um;
        if (w.squaredNorm() <= r2) x(i, j, k) = 1.0;
      }
  return x;
}

double fwhm_from_eigenvalue(double s) {
  if (!(s > 0.0)) throw ConfigError("fwhm_from_eigenvalue: eigenvalue must be positive");
  return 2.0 * std::sqrt(2.0 * std::numbers::ln2 / s);
}

TheoreticalFwhm theoretical_fwhm(double lambda_em_um, double numerical_aperture,
                                 double refractive_index) {
  return {0.7 * lambda_em_um / numerical_aperture,
          2.3 * lambda_em_um * refractive_index / (numerical_aperture * numerical_aperture)};
}

Eigen::Matrix3d rotation_zxz(double phi, double theta, double psi) {
  using Eigen::AngleAxisd;
  using Eigen::Vector3d;
  return (AngleAxisd(phi, Vector3d::UnitZ()) * AngleAxisd(theta, Vector3d::UnitX()) *
          AngleAxisd(psi, Vector3d::UnitZ()))
      .toRotationMatrix();
}

Eigen::Matrix3d spd_from_euler(const EulerDecomp& e) {
  const Eigen::Matrix3d r = rotation_zxz(e.phi, e.theta, e.psi);
  return r * e.eigs.asDiagonal() * r.transpose();
}

EulerDecomp euler_decompose(const Eigen::Matrix3d& s) {
  require_spd(s, "euler_decompose");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (s + s.transpose()));
  const Eigen::Vector3d lam = es.eigenvalues();  // ascending
  const Eigen::Matrix3d vec = es.eigenvectors();

  // The isolated eigenvalue is an end of the sorted list; on a tie prefer
  // the eigenvector closest to z so axis-aligned inputs give theta = 0.
  const double gap_lo = lam[1] - lam[0];
  const double gap_hi = lam[2] - lam[1];
  int iso;
  if (std::abs(gap_lo - gap_hi) <= 1e-12 * std::abs(lam[2]))
    iso = std::abs(vec(2, 0)) > std::abs(vec(2, 2)) ? 0 : 2;
  else
    iso = gap_lo > gap_hi ? 0 : 2;
  const int a = iso == 0 ? 1 : 0;
  const int b = iso == 2 ? 1 : 2;

  Eigen::Vector3d v3 = vec.col(iso);
  Eigen::Vector3d v1 = vec.col(a);
  Eigen::Vector3d v2 = vec.col(b);
  double s1 = lam[a], s2 = lam[b];
  if (v1.cross(v2).dot(v3) < 0.0) v2 = -v2;

  EulerDecomp out;
  const double sin_theta = std::hypot(v3.x(), v3.y());
  const bool aligned = sin_theta < 1e-12;
  if (aligned) {
    if (v3.z() < 0.0) {
      v3 = -v3;
      v2 = -v2;
    }
    out.theta = 0.0;
    out.phi = 0.0;
  } else {
    double phi = std::atan2(v3.x(), -v3.y());
    if (phi <= -std::numbers::pi / 2 || phi > std::numbers::pi / 2) {
      v3 = -v3;
      v2 = -v2;
      phi = std::atan2(v3.x(), -v3.y());
    }
    out.phi = phi;
    out.theta = std::acos(std::clamp(v3.z(), -1.0, 1.0));
  }

  // Relabel the X'/Y' pair by quarter turns about Z' to bring psi into [-pi/4, pi/4].
  auto psi_of = [&](const Eigen::Vector3d& c1, const Eigen::Vector3d& c2) {
    return aligned ? std::atan2(c1.y(), c1.x()) : std::atan2(c1.z(), c2.z());
  };
  struct Candidate {
    Eigen::Vector3d c1, c2;
    double e1, e2;
  };
  const std::array<Candidate, 4> cands{{{v1, v2, s1, s2},
                                        {v2, -v1, s2, s1},
                                        {-v1, -v2, s1, s2},
                                        {-v2, v1, s2, s1}}};
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) {
    const double psi = psi_of(c.c1, c.c2);
    const double score = std::abs(psi) - (psi > 0 ? 1e-14 : 0.0);
    if (score < best) {
      best = score;
      out.psi = psi;
      out.eigs = {c.e1, c.e2, lam[iso]};
    }
  }
  return out;
}

double axis_angle_between(double theta_a, double phi_a, double theta_b, double phi_b) {
  auto axis = [](double t, double p) {
    return Eigen::Vector3d(std::sin(p) * std::sin(t), -std::cos(p) * std::sin(t), std::cos(t));
  };
  const double c = std::abs(axis(theta_a, phi_a).dot(axis(theta_b, phi_b)));
  return std::acos(std::clamp(c, 0.0, 1.0));
}

}  // namespace psfdecon
