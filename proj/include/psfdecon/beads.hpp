#pragma once

#include <Eigen/Core>

#include <array>
#include <limits>
#include <ostream>
#include <vector>

#include "psfdecon/gentle.hpp"
#include "psfdecon/psf_model.hpp"
#include "psfdecon/volume.hpp"

namespace psfdecon {

/// Frequency-domain Wiener filter with a flat signal prior: each DFT
/// coefficient is scaled by |Y|^2 / (|Y|^2 + nsr mean|Y|^2).
Volume wiener_denoise(const Volume& y, double nsr);

struct BeadRegion {
  std::array<Index, 3> lo{};  // inclusive
  std::array<Index, 3> hi{};  // inclusive
  Eigen::Vector3d centroid_um = Eigen::Vector3d::Zero();  // intensity weighted, grid coordinates
  Index voxels = 0;  // supra-threshold voxels in the component

  Dims dims() const { return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}; }
};

struct ExtractOptions {
  double threshold_frac = 0.3;
  Index min_voxels = 1;
  Index max_voxels = std::numeric_limits<Index>::max();
  std::array<Index, 3> margin{0, 0, 0};
};

/// Threshold at threshold_frac * max(y), label 26-connected components,
/// keep those with a size in [min_voxels, max_voxels] and return their
/// bounding boxes grown by the margin and clipped to the volume. Regions
/// are ordered by their first voxel in storage order.
std::vector<BeadRegion> extract_regions(const Volume& y, const ExtractOptions& opts);

/// Sub-volume covered by the region's box.
Volume crop(const Volume& v, const BeadRegion& r);

/// Offset of the region centroid from the grid center of its crop (um).
Eigen::Vector3d centroid_in_crop(const Volume& v, const BeadRegion& r);

void write_regions_csv(std::ostream& os, const std::vector<BeadRegion>& regions);

struct PsfModel {
  double alpha = 0.0;
  double beta = 1.0;
  Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
};

/// Arithmetic mean of alpha, beta and D.
PsfModel average_psf_models(const std::vector<PsfModel>& models);

struct BeadFitOptions {
  ExtractOptions extract;
  /// Denoising applied to the detection image only; fits use the raw crop.
  double wiener_nsr = 1.0;
  double bead_diameter_um = 1.0;
  GentleConfig gentle;
  /// More than one value runs lambda_grid_search per bead.
  std::vector<double> lambdas{100.0};
};

struct BeadFit {
  BeadRegion region;
  double lambda = 0.0;
  GentleResult result;
  EulerDecomp shape;  // of D + eps1 I
  Eigen::Vector3d fwhm_um = Eigen::Vector3d::Zero();  // along X', Y', Z'
};

/// Detect beads, crop each region and run GENTLE with a sphere placed at
/// the region centroid. Throws ConfigError when no region survives.
std::vector<BeadFit> fit_beads(const Volume& y, const BeadFitOptions& opts);

/// index,lambda,alpha,beta,iterations,fwhm_x_um,fwhm_y_um,fwhm_z_um,theta,phi,psi
void write_bead_fits_csv(std::ostream& os, const std::vector<BeadFit>& fits);

}  // namespace psfdecon
