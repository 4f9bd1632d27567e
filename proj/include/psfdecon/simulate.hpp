#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "psfdecon/noise.hpp"
#include "psfdecon/psf_model.hpp"
#include "psfdecon/volume.hpp"

namespace psfdecon {

/// Standard normal sample determined by (seed, stream, index) alone, so
/// volumes can be generated in any order with identical results.
double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Uniform sample in (0, 1) from the same counter scheme.
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// clean + white Gaussian noise scaled so that snr_db(clean, result) is
/// exactly `snr_db` (up to rounding).
Volume add_white_noise_snr(const Volume& clean, double snr_db, std::uint64_t seed);

/// clean + sigma(clean) n with n standard normal per voxel.
Volume add_heteroscedastic_noise(const Volume& clean, const NoiseParams& p, std::uint64_t seed);

struct BeadSimSpec {
  Dims dims{40, 40, 80};
  Eigen::Vector3d voxel_um{0.05, 0.05, 0.1};
  double diameter_um = 1.0;
  double alpha = 0.1;
  double beta = 1.0;
  EulerDecomp shape{};  // precision S(theta, phi, s) of the true kernel
  double eta = 2.0;
  double snr_db = 10.0;
  std::uint64_t seed = 1;
};

/// Preset from the PSF validation experiment: tilt (5 pi / 6, pi / 6) and
/// eigenvalues (138.6, 138.6, 3.2).
BeadSimSpec bead_preset();

struct BeadSim {
  Volume bead;    // x
  Kernel kernel;  // true h
  Volume clean;   // alpha + beta (h * x)
  Volume y;
};

/// Synthetic bead acquisition with circular convolution.
BeadSim simulate_bead(const BeadSimSpec& spec);

/// `count` copies of the clean single-bead tile laid out along x, then y
/// (ceil(sqrt(count)) tiles per row, empty tiles hold the background),
/// with white noise at spec.snr_db over the whole volume.
BeadSim simulate_multi_bead(const BeadSimSpec& spec, int count);

struct RestorationSimSpec {
  Dims dims{64, 64, 32};
  Eigen::Vector3d voxel_um{0.05, 0.05, 0.05};
  Dims kernel_dims{25, 25, 25};
  EulerDecomp blur{};
  NoiseParams noise{0.01, 1e-5};
  double alpha = 0.0;
  std::uint64_t seed = 7;
};

/// Preset from the restoration experiment: tilt (5 pi / 6, 0), eigenvalues
/// (50, 50, 20), noise (0.01, 1e-5), 0.05 um isotropic voxels.
RestorationSimSpec restoration_preset();

struct RestorationSim {
  Volume truth;
  Kernel kernel;
  Volume y;
};

/// Piecewise-smooth phantom with values in [0, 1]: blobs and tubes with
/// slowly varying intensity on a dark background.
Volume piecewise_smooth_phantom(const Dims& dims, const Eigen::Vector3d& voxel_um,
                                std::uint64_t seed);

/// Phantom, zero-padded blur, background and heteroscedastic noise.
RestorationSim simulate_restoration(const RestorationSimSpec& spec);

}  // namespace psfdecon
