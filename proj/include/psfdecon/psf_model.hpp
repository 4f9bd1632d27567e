#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "psfdecon/volume.hpp"

namespace psfdecon {

/// True when `s` is symmetric within `sym_tol` and its eigenvalues are > 0.
template <typename Derived>
bool is_spd(const Eigen::MatrixBase<Derived>& s, double sym_tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (s.rows() != s.cols() || !s.allFinite()) return false;
  const Scalar scale = std::max<Scalar>(Scalar(1), s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale) return false;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > Scalar(0);
}

/// Gaussian density with precision matrix S sampled at the grid points:
/// sqrt(|S| / (2 pi)^3) exp(-1/2 w^T S w). With `normalize` the samples are
/// rescaled to sum to one.
Kernel gaussian_kernel(const Eigen::Matrix3d& precision, const Grid& grid, bool normalize);

/// Generalized exponential kernel proportional to exp(-1/2 (w^T S w)^(eta/2)),
/// normalized to the simplex. eta = 2 is the Gaussian.
Kernel genexp_kernel(const Eigen::Matrix3d& shape, double eta, const Grid& grid);

/// Binary sphere: 1 where |w - center| <= diameter / 2.
Volume sphere_bead(double diameter_um, const Grid& grid,
                   const Eigen::Vector3d& center_um = Eigen::Vector3d::Zero());

/// Full width at half maximum (um) of a Gaussian with precision eigenvalue s.
double fwhm_from_eigenvalue(double s);

struct TheoreticalFwhm {
  double lateral_um;
  double axial_um;
};

/// Diffraction-limited multiphoton FWHM: 0.7 lambda / NA laterally and
/// 2.3 lambda n / NA^2 axially.
TheoreticalFwhm theoretical_fwhm(double lambda_em_um, double numerical_aperture,
                                 double refractive_index);

/// Orientation and principal precisions of a 3x3 SPD matrix.
///
/// S = R diag(eigs) R^T with R = Rz(phi) Rx(theta) Rz(psi) (Z-X-Z). The
/// column R e_z is the Z' axis, carrying the most isolated eigenvalue; the
/// near-degenerate pair goes to X', Y'. theta is the tilt of Z' from the
/// z axis and phi its azimuth; psi rotates X'/Y' about Z' and is only
/// meaningful when s_X' != s_Y'.
///
/// Canonical form: phi in (-pi/2, pi/2] (theta = phi = 0 when Z' is along
/// z) and psi in [-pi/4, pi/4]. The map (theta, phi) -> (pi - theta,
/// phi + pi) describes the same matrix, so recovered angles are compared
/// modulo that symmetry.
struct EulerDecomp {
  double theta = 0.0;
  double phi = 0.0;
  double psi = 0.0;
  Eigen::Vector3d eigs = Eigen::Vector3d::Ones();  // (s_X', s_Y', s_Z')
};

Eigen::Matrix3d rotation_zxz(double phi, double theta, double psi);
EulerDecomp euler_decompose(const Eigen::Matrix3d& s);
Eigen::Matrix3d spd_from_euler(const EulerDecomp& e);

/// Distance between two (theta, phi) orientations of the Z' axis, taking
/// the axis sign symmetry into account: the angle between the two axes.
double axis_angle_between(double theta_a, double phi_a, double theta_b, double phi_b);

}  // namespace psfdecon
