#pragma once

#include <Eigen/Core>

#include "psfdecon/fft.hpp"
#include "psfdecon/volume.hpp"

namespace psfdecon {

enum class Boundary { circular, zero };

/// Linear operator u -> h * u for a fixed kernel h, with its adjoint.
///
/// The kernel reference voxel is its center (n/2 per axis). With
/// Boundary::circular the kernel must have the volume's dims; with
/// Boundary::zero any kernel dims are accepted and the product is the
/// linear convolution cropped back to the volume.
class ConvolutionOperator {
 public:
  ConvolutionOperator(const Dims& volume_dims, const Kernel& kernel, Boundary boundary);

  const Dims& volume_dims() const { return vol_dims_; }
  Boundary boundary() const { return boundary_; }

  Eigen::ArrayXd apply(const Eigen::Ref<const Eigen::ArrayXd>& u);
  Eigen::ArrayXd adjoint(const Eigen::Ref<const Eigen::ArrayXd>& u);

 private:
  Eigen::ArrayXd embed(const Eigen::Ref<const Eigen::ArrayXd>& u, Index ox, Index oy,
                       Index oz) const;
  Eigen::ArrayXd crop(const Eigen::ArrayXd& full, Index ox, Index oy, Index oz) const;

  Dims vol_dims_;
  Dims pad_dims_;
  Index cx_ = 0, cy_ = 0, cz_ = 0;  // kernel center
  Boundary boundary_;
  Fft3 fft_;
  Eigen::ArrayXcd kernel_spectrum_;
  Eigen::ArrayXcd work_spec_;
};

/// Circular convolution via the DFT. The kernel must share the volume dims.
Volume convolve_circular(const Volume& vol, const Kernel& ker);

/// Zero-padded (linear) convolution cropped back to the volume dims.
Volume convolve_zeropad(const Volume& vol, const Kernel& ker);

/// max_n |DFT(vol)_n|^2.
double dft_max_power(const Volume& vol);

}  // namespace psfdecon
