#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "psfdecon/baselines.hpp"
#include "psfdecon/beads.hpp"
#include "psfdecon/config.hpp"
#include "psfdecon/metrics.hpp"
#include "psfdecon/noise.hpp"
#include "psfdecon/pmms.hpp"
#include "psfdecon/simulate.hpp"
#include "psfdecon/volume_io.hpp"

namespace fs = std::filesystem;
using namespace psfdecon;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumeric = 3, kIo = 4 };

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

Volume read_required(const fs::path& p, const char* what, bool config_error_if_missing = false) {
  const fs::path stem = volume_stem(p);
  if (config_error_if_missing && !fs::exists(fs::path(stem).concat(".json")))
    throw ConfigError(std::string(what) + " not found: " + p.string());
  return read_volume(p);
}

void write_manifest(const fs::path& dir, const PipelineConfig& cfg, const std::string& kind,
                    double measured_snr_db) {
  auto os = open_out(dir / "manifest.csv");
  os.precision(17);
  os << "key,value\nkind," << kind << "\nseed," << cfg.seed << "\nmeasured_snr_db," << measured_snr_db
     << '\n';
  auto cs = open_out(dir / "config.json");
  cs << dump_config(cfg);
}

void cmd_simulate(const PipelineConfig& cfg, const std::string& kind, const fs::path& out) {
  fs::create_directories(out);
  if (kind == "bead") {
    const BeadSim s = cfg.bead_count == 1 ? simulate_bead(cfg.bead_sim)
                                          : simulate_multi_bead(cfg.bead_sim, cfg.bead_count);
    write_volume(s.bead, out / "bead");
    write_volume(s.kernel, out / "kernel");
    write_volume(s.clean, out / "clean");
    write_volume(s.y, out / "y");
    write_manifest(out, cfg, kind, snr_db(s.clean, s.y));
  } else if (kind == "restoration") {
    const RestorationSim s = simulate_restoration(cfg.restoration_sim);
    write_volume(s.truth, out / "truth");
    write_volume(s.kernel, out / "kernel");
    write_volume(s.y, out / "y");
    write_manifest(out, cfg, kind, snr_db(s.truth, s.y));
  } else {
    throw ConfigError("simulate: unknown kind '" + kind + "' (bead or restoration)");
  }
}

void cmd_extract(const PipelineConfig& cfg, const fs::path& in, const fs::path& out) {
  const Volume y = read_required(in, "input volume");
  const auto regions = extract_regions(wiener_denoise(y, cfg.psf.wiener_nsr), cfg.psf.extract);
  auto os = open_out(out);
  write_regions_csv(os, regions);
  std::cerr << regions.size() << " region(s)\n";
}

void cmd_estimate_psf(const PipelineConfig& cfg, const fs::path& in, const fs::path& out) {
  const Volume y = read_required(in, "input volume");
  fs::create_directories(out);
  const auto fits = fit_beads(y, cfg.psf);
  {
    auto os = open_out(out / "beads.csv");
    write_bead_fits_csv(os, fits);
  }
  std::vector<PsfModel> models;
  for (size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    models.push_back({f.result.state.alpha, f.result.state.beta, f.result.state.d});
    auto ts = open_out(out / ("bead_" + std::to_string(i) + "_trace.csv"));
    write_gentle_trace_csv(ts, f.result.trace);
  }
  const PsfModel avg = average_psf_models(models);
  const Eigen::Matrix3d s = avg.d + cfg.psf.gentle.eps1 * Eigen::Matrix3d::Identity();
  const EulerDecomp e = euler_decompose(s);
  write_volume(gaussian_kernel(s, Grid(cfg.psf_kernel_dims, y.voxel_um()), true), out / "psf");
  const TheoreticalFwhm th =
      theoretical_fwhm(cfg.optics.emission_um, cfg.optics.numerical_aperture, cfg.optics.refractive_index);
  auto os = open_out(out / "summary.csv");
  os.precision(17);
  os << "beads,alpha,beta,fwhm_x_um,fwhm_y_um,fwhm_z_um,theta,phi,psi,theoretical_lateral_um,"
        "theoretical_axial_um\n"
     << fits.size() << ',' << avg.alpha << ',' << avg.beta << ',' << fwhm_from_eigenvalue(e.eigs[0]) << ','
     << fwhm_from_eigenvalue(e.eigs[1]) << ',' << fwhm_from_eigenvalue(e.eigs[2]) << ',' << e.theta << ','
     << e.phi << ',' << e.psi << ',' << th.lateral_um << ',' << th.axial_um << '\n';
}

void cmd_estimate_noise(const PipelineConfig& cfg, const fs::path& in, const fs::path& out) {
  const Volume y = read_required(in, "input volume");
  const NoiseEstimate est = estimate_noise(y, cfg.noise);
  auto os = open_out(out);
  write_noise_report_csv(os, est);
  std::cerr << "a = " << est.params.a << ", b = " << est.params.b << ", R2 = " << est.r2 << '\n';
}

struct NoiseSource {
  std::string report;
  std::optional<double> a, b;

  NoiseParams resolve() const {
    if (!report.empty()) {
      std::ifstream is(report);
      if (!is) throw IoError("cannot open noise report " + report);
      return read_noise_report_csv(is);
    }
    if (!a || !b) throw ConfigError("restore: give --noise-report or both --noise-a and --noise-b");
    return {*a, *b};
  }
};

void cmd_restore(const PipelineConfig& cfg, const fs::path& in, const fs::path& psf, const NoiseSource& ns,
                 double alpha, const std::string& method, const fs::path& out, const fs::path& log) {
  const Kernel h = read_required(psf, "psf", true);
  const Volume y = read_required(in, "input volume");
  Volume x;
  if (method == "rl") {
    RlOptions ro = cfg.rl;
    ro.alpha = alpha;
    x = richardson_lucy(y, h, ro);
  } else if (method == "pmms") {
    const RestorationProblem p = make_restoration_problem(y, h, alpha, ns.resolve(), cfg.restoration);
    PmmsResult r = pmms_run(p, cfg.schedule);
    if (!log.empty()) {
      auto os = open_out(log);
      write_pmms_log_csv(os, r.log);
    }
    x = std::move(r.x);
  } else {
    throw ConfigError("restore: unknown method '" + method + "' (pmms or rl)");
  }
  write_volume(x, out);
}

void cmd_evaluate(const fs::path& ref, const fs::path& test, const fs::path& out) {
  const Volume r = read_required(ref, "reference volume");
  const Volume t = read_required(test, "test volume");
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out.empty()) {
    file = open_out(out);
    os = &file;
  }
  os->precision(17);
  *os << "metric,value\nsnr_db," << snr_db(r, t) << '\n';
}

void cmd_sweep(const PipelineConfig& cfg, const fs::path& in, const fs::path& truth, const fs::path& psf,
               double alpha, const fs::path& out) {
  const Kernel h = read_required(psf, "psf", true);
  const Volume y = read_required(in, "input volume");
  const Volume t = read_required(truth, "truth volume");
  std::vector<SweepRow> rows;
  for (double chi : log_spaced(cfg.sweep.chi_min, cfg.sweep.chi_max, cfg.sweep.chi_count)) {
    const auto t0 = std::chrono::steady_clock::now();
    const PenalizedResult r = penalized_restore(y, h, alpha, chi, cfg.sweep.penalized);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back({chi, snr_db(t, r.x), r.iterations, dt});
    std::cerr << "chi " << chi << ": " << rows.back().snr_db << " dB\n";
  }
  auto os = open_out(out);
  write_sweep_csv(os, rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bead-based PSF calibration and constrained 3D restoration"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON configuration (defaults when omitted)");

  auto* config = app.add_subcommand("config", "Configuration utilities");
  config->require_subcommand(1);
  auto* dump = config->add_subcommand("dump", "Print the effective configuration");

  std::string kind = "bead", input, output, psf, truth, ref, test, method = "pmms", log;
  double alpha = 0.0;
  NoiseSource noise;

  auto* sim = app.add_subcommand("simulate", "Write a synthetic acquisition and its ground truth");
  sim->add_option("--kind", kind, "bead or restoration")->capture_default_str();
  sim->add_option("-o,--out", output, "Output directory")->required();

  auto* ext = app.add_subcommand("extract-beads", "Detect bead regions");
  ext->add_option("-i,--input", input)->required();
  ext->add_option("-o,--out", output, "Region CSV")->required();

  auto* est = app.add_subcommand("estimate-psf", "Fit GENTLE on every bead and average");
  est->add_option("-i,--input", input)->required();
  est->add_option("-o,--out", output, "Output directory")->required();

  auto* noi = app.add_subcommand("estimate-noise", "Fit sigma^2(t) = a t + b");
  noi->add_option("-i,--input", input)->required();
  noi->add_option("-o,--out", output, "Report CSV")->required();

  auto* res = app.add_subcommand("restore", "Deconvolve a volume");
  res->add_option("-i,--input", input)->required();
  res->add_option("--psf", psf)->required();
  res->add_option("--noise-report", noise.report);
  res->add_option("--noise-a", noise.a);
  res->add_option("--noise-b", noise.b);
  res->add_option("--alpha", alpha, "Known background")->capture_default_str();
  res->add_option("--method", method, "pmms or rl")->capture_default_str();
  res->add_option("-o,--out", output)->required();
  res->add_option("--log", log, "Outer-loop log CSV");

  auto* eva = app.add_subcommand("evaluate", "SNR of a volume against a reference");
  eva->add_option("--ref", ref)->required();
  eva->add_option("--test", test)->required();
  eva->add_option("-o,--out", output, "Metrics CSV (stdout when omitted)");

  auto* swp = app.add_subcommand("sweep-chi", "Penalized restoration over a chi grid");
  swp->add_option("-i,--input", input)->required();
  swp->add_option("--truth", truth)->required();
  swp->add_option("--psf", psf)->required();
  swp->add_option("--alpha", alpha)->capture_default_str();
  swp->add_option("-o,--out", output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    const PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (*dump) std::cout << dump_config(cfg);
    else if (*sim) cmd_simulate(cfg, kind, output);
    else if (*ext) cmd_extract(cfg, input, output);
    else if (*est) cmd_estimate_psf(cfg, input, output);
    else if (*noi) cmd_estimate_noise(cfg, input, output);
    else if (*res) cmd_restore(cfg, input, psf, noise, alpha, method, output, log);
    else if (*eva) cmd_evaluate(ref, test, output);
    else if (*swp) cmd_sweep(cfg, input, truth, psf, alpha, output);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
