#include "psfdecon/convolution.hpp"

namespace psfdecon {

namespace {

Dims padded_dims(const Dims& v, const Dims& k) {
  return {fft_friendly_size(v.nx + k.nx - 1), fft_friendly_size(v.ny + k.ny - 1),
          fft_friendly_size(v.nz + k.nz - 1)};
}

}  // namespace

ConvolutionOperator::ConvolutionOperator(const Dims& volume_dims, const Kernel& kernel,
                                         Boundary boundary)
    : vol_dims_(volume_dims),
      pad_dims_(boundary == Boundary::circular ? volume_dims
                                               : padded_dims(volume_dims, kernel.dims())),
      cx_(kernel.dims().nx / 2),
      cy_(kernel.dims().ny / 2),
      cz_(kernel.dims().nz / 2),
      boundary_(boundary),
      fft_(pad_dims_) {
  if (boundary == Boundary::circular) {
    if (!(kernel.dims() == volume_dims))
      throw ShapeError("circular convolution: kernel dims " + to_string(kernel.dims()) +
                       " differ from volume dims " + to_string(volume_dims));
    fft_.forward(center_to_origin(kernel.values(), volume_dims), kernel_spectrum_);
  } else {
    // Kernel sits at the padded origin; the center offset is removed when cropping.
    const Dims& kd = kernel.dims();
    Eigen::ArrayXd buf = Eigen::ArrayXd::Zero(pad_dims_.count());
    for (Index k = 0; k < kd.nz; ++k)
      for (Index j = 0; j < kd.ny; ++j)
        for (Index i = 0; i < kd.nx; ++i)
          buf[i + pad_dims_.nx * (j + pad_dims_.ny * k)] = kernel(i, j, k);
    fft_.forward(buf, kernel_spectrum_);
  }
}

Eigen::ArrayXd ConvolutionOperator::embed(const Eigen::Ref<const Eigen::ArrayXd>& u, Index ox,
                                          Index oy, Index oz) const {
  Eigen::ArrayXd buf = Eigen::ArrayXd::Zero(pad_dims_.count());
  const Dims& d = vol_dims_;
  for (Index k = 0; k < d.nz; ++k)
    for (Index j = 0; j < d.ny; ++j) {
      const Index src = d.nx * (j + d.ny * k);
      const Index dst = ox + pad_dims_.nx * ((j + oy) + pad_dims_.ny * (k + oz));
      buf.segment(dst, d.nx) = u.segment(src, d.nx);
    }
  return buf;
}

Eigen::ArrayXd ConvolutionOperator::crop(const Eigen::ArrayXd& full, Index ox, Index oy,
                                         Index oz) const {
  const Dims& d = vol_dims_;
  Eigen::ArrayXd out(d.count());
  for (Index k = 0; k < d.nz; ++k)
    for (Index j = 0; j < d.ny; ++j) {
      const Index dst = d.nx * (j + d.ny * k);
      const Index src = ox + pad_dims_.nx * ((j + oy) + pad_dims_.ny * (k + oz));
      out.segment(dst, d.nx) = full.segment(src, d.nx);
    }
  return out;
}

Eigen::ArrayXd ConvolutionOperator::apply(const Eigen::Ref<const Eigen::ArrayXd>& u) {
  if (u.size() != vol_dims_.count()) throw ShapeError("ConvolutionOperator::apply: length mismatch");
  Eigen::ArrayXd out;
  if (boundary_ == Boundary::circular) {
    fft_.forward(u, work_spec_);
    work_spec_ *= kernel_spectrum_;
    fft_.inverse(work_spec_, out);
    return out;
  }
  fft_.forward(embed(u, 0, 0, 0), work_spec_);
  work_spec_ *= kernel_spectrum_;
  Eigen::ArrayXd full;
  fft_.inverse(work_spec_, full);
  return crop(full, cx_, cy_, cz_);
}

Eigen::ArrayXd ConvolutionOperator::adjoint(const Eigen::Ref<const Eigen::ArrayXd>& u) {
  if (u.size() != vol_dims_.count())
    throw ShapeError("ConvolutionOperator::adjoint: length mismatch");
  Eigen::ArrayXd out;
  if (boundary_ == Boundary::circular) {
    fft_.forward(u, work_spec_);
    work_spec_ *= kernel_spectrum_.conjugate();
    fft_.inverse(work_spec_, out);
    return out;
  }
  fft_.forward(embed(u, cx_, cy_, cz_), work_spec_);
  work_spec_ *= kernel_spectrum_.conjugate();
  Eigen::ArrayXd full;
  fft_.inverse(work_spec_, full);
  return crop(full, 0, 0, 0);
}

Volume convolve_circular(const Volume& vol, const Kernel& ker) {
  require_same_shape(vol, ker, "convolve_circular");
  ConvolutionOperator op(vol.dims(), ker, Boundary::circular);
  return vol.with_values(op.apply(vol.values()));
}

Volume convolve_zeropad(const Volume& vol, const Kernel& ker) {
  require_same_shape(vol, ker, "convolve_zeropad");
  ConvolutionOperator op(vol.dims(), ker, Boundary::zero);
  return vol.with_values(op.apply(vol.values()));
}

double dft_max_power(const Volume& vol) {
  Fft3 fft(vol.dims());
  Eigen::ArrayXcd spec;
  fft.forward(vol.values(), spec);
  // The half spectrum covers every magnitude by Hermitian symmetry.
  return spec.abs2().maxCoeff();
}

}  // namespace psfdecon
