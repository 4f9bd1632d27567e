#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

#include "psfdecon/errors.hpp"

namespace psfdecon {

using Eigen::Index;

/// Voxel counts along x, y, z.
struct Dims {
  Index nx = 0;
  Index ny = 0;
  Index nz = 0;

  Index count() const { return nx * ny * nz; }
  Index operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

/// Dense 3D scalar field. Values are stored x-fastest, then y, then z:
/// flat index n = i + nx * (j + ny * k).
template <typename Scalar>
class BasicVolume {
 public:
  using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BasicVolume() = default;

  BasicVolume(const Dims& dims, const Eigen::Vector3d& voxel_um)
      : dims_(dims), voxel_um_(voxel_um), values_(Values::Zero(dims.count())) {
    validate();
  }

  BasicVolume(const Dims& dims, const Eigen::Vector3d& voxel_um, Values values)
      : dims_(dims), voxel_um_(voxel_um), values_(std::move(values)) {
    validate();
  }

  const Dims& dims() const { return dims_; }
  const Eigen::Vector3d& voxel_um() const { return voxel_um_; }
  Index size() const { return values_.size(); }

  Values& values() { return values_; }
  const Values& values() const { return values_; }

  Index index(Index i, Index j, Index k) const { return i + dims_.nx * (j + dims_.ny * k); }

  Scalar& operator()(Index i, Index j, Index k) { return values_[index(i, j, k)]; }
  Scalar operator()(Index i, Index j, Index k) const { return values_[index(i, j, k)]; }

  /// Same geometry, new values.
  template <typename Derived>
  BasicVolume with_values(const Eigen::ArrayBase<Derived>& values) const {
    return BasicVolume(dims_, voxel_um_, Values(values));
  }

  template <typename Other>
  BasicVolume<Other> cast() const {
    return BasicVolume<Other>(dims_, voxel_um_, values_.template cast<Other>());
  }

  bool same_shape(const BasicVolume& other) const { return dims_ == other.dims_; }

 private:
  void validate() const {
    if (dims_.nx <= 0 || dims_.ny <= 0 || dims_.nz <= 0)
      throw ShapeError("volume dims must be positive, got " + to_string(dims_));
    if (!(voxel_um_.array() > 0.0).all())
      throw ConfigError("voxel sizes must be strictly positive");
    if (values_.size() != dims_.count())
      throw ShapeError("data length " + std::to_string(values_.size()) + " does not match dims " +
                       to_string(dims_));
  }

  Dims dims_{};
  Eigen::Vector3d voxel_um_ = Eigen::Vector3d::Ones();
  Values values_;
};

using Volume = BasicVolume<double>;

/// A volume interpreted as a convolution kernel whose reference voxel
/// (the "center") is (nx/2, ny/2, nz/2) with integer division.
using Kernel = Volume;

void require_same_shape(const Volume& a, const Volume& b, const char* what);

/// Discrete Dirac kernel: 1 at the center voxel.
Kernel dirac_kernel(const Dims& dims, const Eigen::Vector3d& voxel_um);

/// Nonnegative entries summing to one within `tol`.
bool on_simplex(const Eigen::ArrayXd& h, double tol = 1e-12);

/// Voxel mass centers in micrometers, symmetric about the origin:
/// omega_a(i) = (i - (n_a - 1) / 2) * r_a.
class Grid {
 public:
  Grid(const Dims& dims, const Eigen::Vector3d& voxel_um);
  explicit Grid(const Volume& like) : Grid(like.dims(), like.voxel_um()) {}

  const Dims& dims() const { return dims_; }
  const Eigen::Vector3d& voxel_um() const { return voxel_um_; }
  Index size() const { return dims_.count(); }

  /// Coordinates along one axis.
  const Eigen::ArrayXd& axis(int a) const { return axes_[a]; }

  Eigen::Vector3d point(Index n) const;
  Eigen::Vector3d point(Index i, Index j, Index k) const {
    return {axes_[0][i], axes_[1][j], axes_[2][k]};
  }

  /// omega_n^T Q omega_n for every voxel.
  Eigen::ArrayXd quadratic_form(const Eigen::Matrix3d& q) const;

  /// sum_n w_n omega_n omega_n^T.
  Eigen::Matrix3d weighted_second_moment(const Eigen::ArrayXd& w) const;

  /// Product of the voxel edge lengths.
  double voxel_volume() const { return voxel_um_.prod(); }

 private:
  Dims dims_;
  Eigen::Vector3d voxel_um_;
  Eigen::ArrayXd axes_[3];
};

/// Move the kernel center voxel to flat index 0 (inverse FFT shift).
Eigen::ArrayXd center_to_origin(const Eigen::ArrayXd& centered, const Dims& dims);
/// Inverse of center_to_origin.
Eigen::ArrayXd origin_to_center(const Eigen::ArrayXd& shifted, const Dims& dims);

}  // namespace psfdecon
