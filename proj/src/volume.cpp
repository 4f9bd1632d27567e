#include "psfdecon/volume.hpp"

#include <cmath>

namespace psfdecon {

std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

void require_same_shape(const Volume& a, const Volume& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.dims()) + " vs " +
                     to_string(b.dims()));
}

Kernel dirac_kernel(const Dims& dims, const Eigen::Vector3d& voxel_um) {
  Kernel k(dims, voxel_um);
  k(dims.nx / 2, dims.ny / 2, dims.nz / 2) = 1.0;
  return k;
}

bool on_simplex(const Eigen::ArrayXd& h, double tol) {
  if (h.size() == 0 || !h.allFinite()) return false;
  if ((h < 0.0).any()) return false;
  return std::abs(h.sum() - 1.0) <= tol;
}

Grid::Grid(const Dims& dims, const Eigen::Vector3d& voxel_um) : dims_(dims), voxel_um_(voxel_um) {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
    throw ShapeError("grid dims must be positive, got " + to_string(dims));
  if (!(voxel_um.array() > 0.0).all()) throw ConfigError("voxel sizes must be strictly positive");
  for (int a = 0; a < 3; ++a) {
    const Index n = dims[a];
    axes_[a].resize(n);
    const double mid = 0.5 * static_cast<double>(n - 1);
    for (Index i = 0; i < n; ++i) axes_[a][i] = (static_cast<double>(i) - mid) * voxel_um[a];
  }
}

Eigen::Vector3d Grid::point(Index n) const {
  const Index i = n % dims_.nx;
  const Index j = (n / dims_.nx) % dims_.ny;
  const Index k = n / (dims_.nx * dims_.ny);
  return point(i, j, k);
}

Eigen::ArrayXd Grid::quadratic_form(const Eigen::Matrix3d& q) const {
  Eigen::ArrayXd out(size());
  const Eigen::Matrix3d s = 0.5 * (q + q.transpose());
  Index n = 0;
  for (Index k = 0; k < dims_.nz; ++k) {
    const double z = axes_[2][k];
    for (Index j = 0; j < dims_.ny; ++j) {
      const double y = axes_[1][j];
      // Terms independent of x.
      const double c0 = s(1, 1) * y * y + s(2, 2) * z * z + 2.0 * s(1, 2) * y * z;
      const double c1 = 2.0 * (s(0, 1) * y + s(0, 2) * z);
      for (Index i = 0; i < dims_.nx; ++i, ++n) {
        const double x = axes_[0][i];
        out[n] = s(0, 0) * x * x + c1 * x + c0;
      }
    }
  }
  return out;
}

Eigen::Matrix3d Grid::weighted_second_moment(const Eigen::ArrayXd& w) const {
  if (w.size() != size()) throw ShapeError("weighted_second_moment: weight length mismatch");
  double xx = 0, yy = 0, zz = 0, xy = 0, xz = 0, yz = 0;
  Index n = 0;
  for (Index k = 0; k < dims_.nz; ++k) {
    const double z = axes_[2][k];
    for (Index j = 0; j < dims_.ny; ++j) {
      const double y = axes_[1][j];
      double s0 = 0, s1 = 0, s2 = 0;  // sum w, sum w x, sum w x^2 along the row
      for (Index i = 0; i < dims_.nx; ++i, ++n) {
        const double x = axes_[0][i];
        const double wn = w[n];
        s0 += wn;
        s1 += wn * x;
        s2 += wn * x * x;
      }
      xx += s2;
      yy += s0 * y * y;
      zz += s0 * z * z;
      xy += s1 * y;
      xz += s1 * z;
      yz += s0 * y * z;
    }
  }
  Eigen::Matrix3d m;
  m << xx, xy, xz, xy, yy, yz, xz, yz, zz;
  return m;
}

namespace {

Eigen::ArrayXd circular_shift(const Eigen::ArrayXd& in, const Dims& d, Index sx, Index sy,
                              Index sz) {
  if (in.size() != d.count()) throw ShapeError("shift: data length does not match dims");
  Eigen::ArrayXd out(in.size());
  for (Index k = 0; k < d.nz; ++k) {
    const Index kk = (k + sz) % d.nz;
    for (Index j = 0; j < d.ny; ++j) {
      const Index jj = (j + sy) % d.ny;
      const Index src_row = d.nx * (j + d.ny * k);
      const Index dst_row = d.nx * (jj + d.ny * kk);
      for (Index i = 0; i < d.nx; ++i) out[dst_row + (i + sx) % d.nx] = in[src_row + i];
    }
  }
  return out;
}

}  // namespace

Eigen::ArrayXd center_to_origin(const Eigen::ArrayXd& centered, const Dims& d) {
  // Voxel at n/2 lands on 0: shift by n - n/2.
  return circular_shift(centered, d, d.nx - d.nx / 2, d.ny - d.ny / 2, d.nz - d.nz / 2);
}

Eigen::ArrayXd origin_to_center(const Eigen::ArrayXd& shifted, const Dims& d) {
  return circular_shift(shifted, d, d.nx / 2, d.ny / 2, d.nz / 2);
}

}  // namespace psfdecon
