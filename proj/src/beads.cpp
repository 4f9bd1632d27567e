#include "psfdecon/beads.hpp"

#include <algorithm>
#include <limits>

#include "psfdecon/fft.hpp"

namespace psfdecon {

Volume wiener_denoise(const Volume& y, double nsr) {
  if (!(nsr >= 0.0)) throw ConfigError("wiener_denoise: nsr must be nonnegative");
  if (nsr == 0.0) return y;
  Fft3 fft(y.dims());
  Eigen::ArrayXcd spec;
  fft.forward(y.values(), spec);
  // Parseval: the mean of |Y|^2 over the full spectrum is sum(y^2).
  const double mean_power = y.values().square().sum();
  if (mean_power == 0.0) return y;
  const Eigen::ArrayXd p = spec.abs2();
  spec *= (p / (p + nsr * mean_power)).cast<std::complex<double>>();
  Eigen::ArrayXd out;
  fft.inverse(spec, out);
  return y.with_values(out);
}

std::vector<BeadRegion> extract_regions(const Volume& y, const ExtractOptions& opts) {
  if (!(opts.threshold_frac > 0.0 && opts.threshold_frac < 1.0))
    throw ConfigError("extract_regions: threshold_frac must lie in (0, 1)");
  std::vector<BeadRegion> out;
  const double peak = y.values().maxCoeff();
  if (!(peak > 0.0)) return out;
  const double thr = opts.threshold_frac * peak;
  const Dims& d = y.dims();
  const Grid grid(y);

  std::vector<int> label(static_cast<size_t>(y.size()), 0);
  std::vector<Index> stack;
  int next = 0;
  for (Index seed = 0; seed < y.size(); ++seed) {
    if (label[seed] != 0 || !(y.values()[seed] > thr)) continue;
    ++next;
    BeadRegion r;
    r.lo = {d.nx, d.ny, d.nz};
    r.hi = {-1, -1, -1};
    double wsum = 0.0;
    Eigen::Vector3d wpos = Eigen::Vector3d::Zero();
    stack.assign(1, seed);
    label[seed] = next;
    while (!stack.empty()) {
      const Index n = stack.back();
      stack.pop_back();
      const Index i = n % d.nx, j = (n / d.nx) % d.ny, k = n / (d.nx * d.ny);
      const std::array<Index, 3> ijk{i, j, k};
      for (int a = 0; a < 3; ++a) {
        r.lo[a] = std::min(r.lo[a], ijk[a]);
        r.hi[a] = std::max(r.hi[a], ijk[a]);
      }
      const double w = y.values()[n];
      wsum += w;
      wpos += w * grid.point(i, j, k);
      ++r.voxels;
      for (Index dk = -1; dk <= 1; ++dk)
        for (Index dj = -1; dj <= 1; ++dj)
          for (Index di = -1; di <= 1; ++di) {
            const Index ii = i + di, jj = j + dj, kk = k + dk;
            if (ii < 0 || jj < 0 || kk < 0 || ii >= d.nx || jj >= d.ny || kk >= d.nz) continue;
            const Index m = y.index(ii, jj, kk);
            if (label[m] == 0 && y.values()[m] > thr) {
              label[m] = next;
              stack.push_back(m);
            }
          }
    }
    if (r.voxels < opts.min_voxels || r.voxels > opts.max_voxels) continue;
    r.centroid_um = wpos / wsum;
    for (int a = 0; a < 3; ++a) {
      r.lo[a] = std::max<Index>(0, r.lo[a] - opts.margin[a]);
      r.hi[a] = std::min<Index>(d[a] - 1, r.hi[a] + opts.margin[a]);
    }
    out.push_back(r);
  }
  return out;
}

Volume crop(const Volume& v, const BeadRegion& r) {
  const Dims cd = r.dims();
  for (int a = 0; a < 3; ++a)
    if (r.lo[a] < 0 || r.hi[a] >= v.dims()[a] || r.lo[a] > r.hi[a])
      throw ShapeError("crop: region outside the volume");
  Volume out(cd, v.voxel_um());
  for (Index k = 0; k < cd.nz; ++k)
    for (Index j = 0; j < cd.ny; ++j)
      for (Index i = 0; i < cd.nx; ++i) out(i, j, k) = v(r.lo[0] + i, r.lo[1] + j, r.lo[2] + k);
  return out;
}

Eigen::Vector3d centroid_in_crop(const Volume& v, const BeadRegion& r) {
  const Grid g(v);
  Eigen::Vector3d mid;
  for (int a = 0; a < 3; ++a) mid[a] = 0.5 * (g.axis(a)[r.lo[a]] + g.axis(a)[r.hi[a]]);
  return r.centroid_um - mid;
}

void write_regions_csv(std::ostream& os, const std::vector<BeadRegion>& regions) {
  const auto prec = os.precision(17);
  os << "index,x0,x1,y0,y1,z0,z1,centroid_x_um,centroid_y_um,centroid_z_um,voxels\n";
  for (size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    os << i << ',' << r.lo[0] << ',' << r.hi[0] << ',' << r.lo[1] << ',' << r.hi[1] << ',' << r.lo[2]
       << ',' << r.hi[2] << ',' << r.centroid_um[0] << ',' << r.centroid_um[1] << ','
       << r.centroid_um[2] << ',' << r.voxels << '\n';
  }
  os.precision(prec);
}

PsfModel average_psf_models(const std::vector<PsfModel>& models) {
  if (models.empty()) throw ConfigError("average_psf_models: no models");
  PsfModel m;
  m.beta = 0.0;
  for (const auto& e : models) {
    m.alpha += e.alpha;
    m.beta += e.beta;
    m.d += e.d;
  }
  const double n = static_cast<double>(models.size());
  m.alpha /= n;
  m.beta /= n;
  m.d /= n;
  m.d = (0.5 * (m.d + m.d.transpose())).eval();
  return m;
}

std::vector<BeadFit> fit_beads(const Volume& y, const BeadFitOptions& opts) {
  if (opts.lambdas.empty()) throw ConfigError("fit_beads: empty lambda list");
  const auto regions = extract_regions(wiener_denoise(y, opts.wiener_nsr), opts.extract);
  if (regions.empty()) throw ConfigError("fit_beads: no regions found");
  std::vector<BeadFit> out;
  for (const auto& r : regions) {
    const Volume c = crop(y, r);
    const Volume bead = sphere_bead(opts.bead_diameter_um, Grid(c), centroid_in_crop(y, r));
    BeadFit f;
    f.region = r;
    if (opts.lambdas.size() == 1) {
      GentleConfig cfg = opts.gentle;
      cfg.lambda = opts.lambdas.front();
      f.lambda = cfg.lambda;
      f.result = run_gentle(c, bead, cfg, default_gentle_init(bead, cfg));
    } else {
      LambdaSearchResult s = lambda_grid_search(c, bead, opts.gentle, opts.lambdas);
      f.lambda = s.lambda;
      f.result = std::move(s.best);
    }
    f.shape = euler_decompose(f.result.state.d + opts.gentle.eps1 * Eigen::Matrix3d::Identity());
    for (int a = 0; a < 3; ++a) f.fwhm_um[a] = fwhm_from_eigenvalue(f.shape.eigs[a]);
    out.push_back(std::move(f));
  }
  return out;
}

void write_bead_fits_csv(std::ostream& os, const std::vector<BeadFit>& fits) {
  const auto prec = os.precision(17);
  os << "index,lambda,alpha,beta,iterations,fwhm_x_um,fwhm_y_um,fwhm_z_um,theta,phi,psi\n";
  for (size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    os << i << ',' << f.lambda << ',' << f.result.state.alpha << ',' << f.result.state.beta << ','
       << f.result.iterations << ',' << f.fwhm_um[0] << ',' << f.fwhm_um[1] << ',' << f.fwhm_um[2] << ','
       << f.shape.theta << ',' << f.shape.phi << ',' << f.shape.psi << '\n';
  }
  os.precision(prec);
}

}  // namespace psfdecon
