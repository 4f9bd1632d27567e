#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psfdecon/baselines.hpp"
#include "psfdecon/beads.hpp"
#include "psfdecon/noise.hpp"
#include "psfdecon/pmms.hpp"
#include "psfdecon/simulate.hpp"

namespace psfdecon {

struct Optics {
  double emission_um = 0.515;
  double numerical_aperture = 1.05;
  double refractive_index = 1.33;
};

struct SweepOptions {
  double chi_min = 1e-6;
  double chi_max = 1e-1;
  int chi_count = 15;
  PenalizedOptions penalized;
};

/// Every tunable of the command-line pipeline. One seed drives all noise.
struct PipelineConfig {
  std::uint64_t seed = 1;
  BeadSimSpec bead_sim = bead_preset();
  int bead_count = 1;
  RestorationSimSpec restoration_sim = [] {
    RestorationSimSpec s = restoration_preset();
    s.seed = 1;
    return s;
  }();
  BeadFitOptions psf = [] {
    BeadFitOptions o;
    o.extract.min_voxels = 100;
    o.extract.margin = {3, 3, 24};
    return o;
  }();
  Dims psf_kernel_dims{25, 25, 25};
  Optics optics;
  NoiseEstimateOptions noise;
  RestorationOptions restoration;
  PenaltySchedule schedule = real_data_schedule();
  RlOptions rl;
  SweepOptions sweep;
};

/// Defaults overlaid with the JSON text; unknown keys and ill-typed values
/// raise ConfigError naming the offending path.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Full JSON form, accepted back by parse_config.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace psfdecon
