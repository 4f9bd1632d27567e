#pragma once

#include <Eigen/Core>

#include <complex>
#include <memory>

#include "psfdecon/volume.hpp"

namespace psfdecon {

/// Real-to-complex 3D DFT on a fixed grid, backed by FFTW.
///
/// The half spectrum has (nx/2 + 1) * ny * nz coefficients, x-fastest.
/// Each instance owns its plans and work buffers; instances are not shared
/// between threads, but independent instances may run concurrently.
class Fft3 {
 public:
  explicit Fft3(const Dims& dims);
  ~Fft3();
  Fft3(Fft3&&) noexcept;
  Fft3& operator=(Fft3&&) noexcept;
  Fft3(const Fft3&) = delete;
  Fft3& operator=(const Fft3&) = delete;

  const Dims& dims() const { return dims_; }
  Index spectrum_size() const { return (dims_.nx / 2 + 1) * dims_.ny * dims_.nz; }

  void forward(const Eigen::Ref<const Eigen::ArrayXd>& in, Eigen::ArrayXcd& out);
  /// Normalized inverse: inverse(forward(x)) == x.
  void inverse(const Eigen::Ref<const Eigen::ArrayXcd>& in, Eigen::ArrayXd& out);

 private:
  struct Plans;
  Dims dims_;
  std::unique_ptr<Plans> plans_;
};

/// Smallest integer >= n whose only prime factors are 2, 3, 5, 7.
Index fft_friendly_size(Index n);

}  // namespace psfdecon
