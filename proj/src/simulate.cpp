#include "psfdecon/simulate.hpp"

#include <cmath>
#include <numbers>

#include "psfdecon/convolution.hpp"

namespace psfdecon {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix64(seed ^ mix64(stream ^ mix64(index)));
}

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kPhantomStream = 2;

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return (static_cast<double>(counter_hash(seed, stream, index) >> 11) + 0.5) * 0x1.0p-53;
}

double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const double u1 = counter_uniform(seed, stream, 2 * index);
  const double u2 = counter_uniform(seed, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

Eigen::ArrayXd normal_field(Index n, std::uint64_t seed) {
  Eigen::ArrayXd out(n);
  for (Index i = 0; i < n; ++i) out[i] = counter_normal(seed, kNoiseStream, static_cast<std::uint64_t>(i));
  return out;
}

}  // namespace

Volume add_white_noise_snr(const Volume& clean, double snr_db, std::uint64_t seed) {
  Eigen::ArrayXd nu = normal_field(clean.size(), seed);
  const double target = clean.values().matrix().squaredNorm() / std::pow(10.0, snr_db / 10.0);
  nu *= std::sqrt(target / nu.matrix().squaredNorm());
  return clean.with_values(clean.values() + nu);
}

Volume add_heteroscedastic_noise(const Volume& clean, const NoiseParams& p, std::uint64_t seed) {
  const Eigen::ArrayXd nu = normal_field(clean.size(), seed);
  return clean.with_values(clean.values() + sigma(clean.values(), p) * nu);
}

BeadSimSpec bead_preset() {
  BeadSimSpec s;
  s.shape.theta = 5.0 * std::numbers::pi / 6.0;
  s.shape.phi = std::numbers::pi / 6.0;
  s.shape.psi = 0.0;
  s.shape.eigs = {138.6, 138.6, 3.2};
  return s;
}

BeadSim simulate_bead(const BeadSimSpec& spec) {
  const Grid grid(spec.dims, spec.voxel_um);
  BeadSim out;
  out.bead = sphere_bead(spec.diameter_um, grid);
  out.kernel = genexp_kernel(spd_from_euler(spec.shape), spec.eta, grid);
  out.clean = out.bead.with_values(spec.alpha + spec.beta * convolve_circular(out.bead, out.kernel).values());
  out.y = add_white_noise_snr(out.clean, spec.snr_db, spec.seed);
  return out;
}

BeadSim simulate_multi_bead(const BeadSimSpec& spec, int count) {
  if (count < 1) throw ConfigError("simulate_multi_bead: count must be positive");
  const BeadSim tile = simulate_bead(spec);
  const Index per_row = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(count))));
  const Index rows = (count + per_row - 1) / per_row;
  const Dims& t = spec.dims;
  const Dims d{t.nx * per_row, t.ny * rows, t.nz};
  BeadSim out;
  out.kernel = tile.kernel;
  out.bead = Volume(d, spec.voxel_um);
  out.clean = Volume(d, spec.voxel_um, Eigen::ArrayXd::Constant(d.count(), spec.alpha));
  for (int b = 0; b < count; ++b) {
    const Index ox = (b % per_row) * t.nx, oy = (b / per_row) * t.ny;
    for (Index k = 0; k < t.nz; ++k)
      for (Index j = 0; j < t.ny; ++j)
        for (Index i = 0; i < t.nx; ++i) {
          out.bead(ox + i, oy + j, k) = tile.bead(i, j, k);
          out.clean(ox + i, oy + j, k) = tile.clean(i, j, k);
        }
  }
  out.y = add_white_noise_snr(out.clean, spec.snr_db, spec.seed);
  return out;
}

RestorationSimSpec restoration_preset() {
  RestorationSimSpec s;
  s.blur.theta = 5.0 * std::numbers::pi / 6.0;
  s.blur.phi = 0.0;
  s.blur.eigs = {50.0, 50.0, 20.0};
  return s;
}

Volume piecewise_smooth_phantom(const Dims& dims, const Eigen::Vector3d& voxel_um,
                                std::uint64_t seed) {
  const Grid grid(dims, voxel_um);
  Volume v(dims, voxel_um);
  const Eigen::Vector3d half = 0.5 * Eigen::Vector3d(static_cast<double>(dims.nx) * voxel_um[0],
                                                     static_cast<double>(dims.ny) * voxel_um[1],
                                                     static_cast<double>(dims.nz) * voxel_um[2]);
  std::uint64_t ctr = 0;
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * counter_uniform(seed, kPhantomStream, ctr++); };

  // Ellipsoids with a linear intensity ramp inside.
  const int blobs = 10;
  for (int b = 0; b < blobs; ++b) {
    const Eigen::Vector3d c(uni(-0.7, 0.7) * half[0], uni(-0.7, 0.7) * half[1], uni(-0.6, 0.6) * half[2]);
    const Eigen::Vector3d radii(uni(0.12, 0.3) * half[0], uni(0.12, 0.3) * half[1], uni(0.2, 0.45) * half[2]);
    const Eigen::Vector3d slope(uni(-1, 1), uni(-1, 1), uni(-1, 1));
    const double level = uni(0.3, 0.9);
    for (Index n = 0; n < v.size(); ++n) {
      const Eigen::Vector3d w = grid.point(n) - c;
      const double q = w.cwiseQuotient(radii).squaredNorm();
      if (q <= 1.0) {
        const double ramp = 1.0 + 0.25 * slope.dot(w.cwiseQuotient(radii));
        v.values()[n] = std::max(v.values()[n], level * ramp);
      }
    }
  }
  // Thin tubes along random directions through the volume.
  const int tubes = 4;
  for (int t = 0; t < tubes; ++t) {
    const Eigen::Vector3d p0(uni(-0.5, 0.5) * half[0], uni(-0.5, 0.5) * half[1], uni(-0.5, 0.5) * half[2]);
    Eigen::Vector3d dir(uni(-1, 1), uni(-1, 1), uni(-0.3, 0.3));
    dir.normalize();
    const double radius = uni(1.5, 2.5) * voxel_um.minCoeff();
    const double level = uni(0.5, 1.0);
    for (Index n = 0; n < v.size(); ++n) {
      const Eigen::Vector3d w = grid.point(n) - p0;
      const double dist2 = (w - w.dot(dir) * dir).squaredNorm();
      if (dist2 <= radius * radius) v.values()[n] = std::max(v.values()[n], level);
    }
  }
  v.values() = (v.values() + 0.02).min(1.0);
  return v;
}

RestorationSim simulate_restoration(const RestorationSimSpec& spec) {
  RestorationSim out;
  out.truth = piecewise_smooth_phantom(spec.dims, spec.voxel_um, spec.seed);
  out.kernel = gaussian_kernel(spd_from_euler(spec.blur), Grid(spec.kernel_dims, spec.voxel_um), true);
  ConvolutionOperator h(spec.dims, out.kernel, Boundary::zero);
  const Volume blurred = out.truth.with_values(h.apply(out.truth.values()) + spec.alpha);
  out.y = add_heteroscedastic_noise(blurred, spec.noise, spec.seed + 1);
  return out;
}

}  // namespace psfdecon
