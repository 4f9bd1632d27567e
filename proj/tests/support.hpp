#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>

#include "psfdecon/convolution.hpp"
#include "psfdecon/volume.hpp"

namespace testing {

using psfdecon::Dims;
using psfdecon::Index;
using psfdecon::Volume;

inline Volume random_volume(const Dims& d, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            const Eigen::Vector3d& voxel = Eigen::Vector3d::Ones()) {
  std::uniform_real_distribution<double> u(lo, hi);
  Volume v(d, voxel);
  for (Index n = 0; n < v.size(); ++n) v.values()[n] = u(rng);
  return v;
}

inline Volume random_simplex(const Dims& d, std::mt19937_64& rng) {
  Volume v = random_volume(d, rng, 0.0, 1.0);
  v.values() /= v.values().sum();
  return v;
}

inline Index wrap(Index i, Index n) { return ((i % n) + n) % n; }

// Direct spatial sums; the kernel weight for offset 0 sits at its center n/2.
inline Volume direct_circular(const Volume& v, const Volume& k) {
  const Dims& d = v.dims();
  Volume out(d, v.voxel_um());
  for (Index z = 0; z < d.nz; ++z)
    for (Index y = 0; y < d.ny; ++y)
      for (Index x = 0; x < d.nx; ++x) {
        double s = 0.0;
        for (Index c = 0; c < d.nz; ++c)
          for (Index b = 0; b < d.ny; ++b)
            for (Index a = 0; a < d.nx; ++a)
              s += v(a, b, c) * k(wrap(x - a + d.nx / 2, d.nx), wrap(y - b + d.ny / 2, d.ny),
                                  wrap(z - c + d.nz / 2, d.nz));
        out(x, y, z) = s;
      }
  return out;
}

inline Volume direct_zeropad(const Volume& v, const Volume& k) {
  const Dims& d = v.dims();
  const Dims& kd = k.dims();
  Volume out(d, v.voxel_um());
  for (Index z = 0; z < d.nz; ++z)
    for (Index y = 0; y < d.ny; ++y)
      for (Index x = 0; x < d.nx; ++x) {
        double s = 0.0;
        for (Index c = 0; c < d.nz; ++c)
          for (Index b = 0; b < d.ny; ++b)
            for (Index a = 0; a < d.nx; ++a) {
              const Index i = x - a + kd.nx / 2, j = y - b + kd.ny / 2, l = z - c + kd.nz / 2;
              if (i < 0 || j < 0 || l < 0 || i >= kd.nx || j >= kd.ny || l >= kd.nz) continue;
              s += v(a, b, c) * k(i, j, l);
            }
        out(x, y, z) = s;
      }
  return out;
}

/// Zero-boundary convolution with a kernel of any size.
inline Volume blur(const Volume& x, const psfdecon::Kernel& h) {
  psfdecon::ConvolutionOperator op(x.dims(), h, psfdecon::Boundary::zero);
  return x.with_values(op.apply(x.values()));
}

/// O(N^2) DFT power spectrum maximum.
inline double naive_dft_max_power(const Volume& v) {
  const Dims& d = v.dims();
  double best = 0.0;
  const double tau = 2.0 * std::numbers::pi;
  for (Index p = 0; p < d.nz; ++p)
    for (Index q = 0; q < d.ny; ++q)
      for (Index r = 0; r < d.nx; ++r) {
        std::complex<double> acc = 0.0;
        for (Index k = 0; k < d.nz; ++k)
          for (Index j = 0; j < d.ny; ++j)
            for (Index i = 0; i < d.nx; ++i) {
              const double ph = -tau * (static_cast<double>(r * i) / d.nx + static_cast<double>(q * j) / d.ny +
                                        static_cast<double>(p * k) / d.nz);
              acc += v(i, j, k) * std::polar(1.0, ph);
            }
        best = std::max(best, std::norm(acc));
      }
  return best;
}

/// Minimizes a unimodal function on [lo, hi].
template <typename F>
double golden_section(F&& f, double lo, double hi, double tol = 1e-12) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi, c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline std::filesystem::path scratch_dir(const char* name) {
  auto p = std::filesystem::temp_directory_path() / "psfdecon_tests" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
