#include "psfdecon/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace psfdecon {

namespace {

using nlohmann::json;

Boundary boundary_from(const std::string& s) {
  if (s == "zero") return Boundary::zero;
  if (s == "circular") return Boundary::circular;
  throw ConfigError("unknown boundary '" + s + "' (expected zero or circular)");
}

std::string boundary_name(Boundary b) { return b == Boundary::zero ? "zero" : "circular"; }

// One traversal serves both directions: Dump writes each field into a JSON
// tree, Load reads whatever the tree provides.
struct Dump {
  json& root;
  template <typename T>
  void operator()(const char* ptr, T& v) {
    root[json::json_pointer(ptr)] = v;
  }
  void operator()(const char* ptr, Dims& d) { root[json::json_pointer(ptr)] = {d.nx, d.ny, d.nz}; }
  void operator()(const char* ptr, Eigen::Vector3d& v) { root[json::json_pointer(ptr)] = {v[0], v[1], v[2]}; }
  void operator()(const char* ptr, Boundary& b) { root[json::json_pointer(ptr)] = boundary_name(b); }
};

struct Load {
  const json& root;
  template <typename T>
  void operator()(const char* ptr, T& v) {
    const json::json_pointer p(ptr);
    if (!root.contains(p)) return;
    try {
      read(root.at(p), v);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config ") + ptr + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config ") + ptr + ": " + e.what());
    }
  }

 private:
  template <typename T>
  static void read(const json& j, T& v) {
    v = j.get<T>();
  }
  static void read(const json& j, Dims& d) {
    const auto a = j.get<std::array<Index, 3>>();
    d = {a[0], a[1], a[2]};
  }
  static void read(const json& j, Eigen::Vector3d& v) {
    const auto a = j.get<std::array<double, 3>>();
    v = {a[0], a[1], a[2]};
  }
  static void read(const json& j, Boundary& b) { b = boundary_from(j.get<std::string>()); }
};

template <typename F>
void visit(PipelineConfig& c, F&& f) {
  f("/seed", c.seed);

  auto& b = c.bead_sim;
  f("/simulate/bead/dims", b.dims);
  f("/simulate/bead/voxel_um", b.voxel_um);
  f("/simulate/bead/diameter_um", b.diameter_um);
  f("/simulate/bead/alpha", b.alpha);
  f("/simulate/bead/beta", b.beta);
  f("/simulate/bead/theta", b.shape.theta);
  f("/simulate/bead/phi", b.shape.phi);
  f("/simulate/bead/psi", b.shape.psi);
  f("/simulate/bead/eigenvalues", b.shape.eigs);
  f("/simulate/bead/eta", b.eta);
  f("/simulate/bead/snr_db", b.snr_db);
  f("/simulate/bead/count", c.bead_count);

  auto& r = c.restoration_sim;
  f("/simulate/restoration/dims", r.dims);
  f("/simulate/restoration/voxel_um", r.voxel_um);
  f("/simulate/restoration/kernel_dims", r.kernel_dims);
  f("/simulate/restoration/theta", r.blur.theta);
  f("/simulate/restoration/phi", r.blur.phi);
  f("/simulate/restoration/psi", r.blur.psi);
  f("/simulate/restoration/eigenvalues", r.blur.eigs);
  f("/simulate/restoration/noise_a", r.noise.a);
  f("/simulate/restoration/noise_b", r.noise.b);
  f("/simulate/restoration/alpha", r.alpha);

  auto& e = c.psf.extract;
  f("/psf/extract/threshold_frac", e.threshold_frac);
  f("/psf/extract/min_voxels", e.min_voxels);
  f("/psf/extract/max_voxels", e.max_voxels);
  f("/psf/extract/margin", e.margin);
  f("/psf/wiener_nsr", c.psf.wiener_nsr);
  f("/psf/bead_diameter_um", c.psf.bead_diameter_um);
  f("/psf/lambdas", c.psf.lambdas);
  f("/psf/kernel_dims", c.psf_kernel_dims);
  auto& g = c.psf.gentle;
  f("/psf/gentle/eps1", g.eps1);
  f("/psf/gentle/eps2", g.eps2);
  f("/psf/gentle/zeta", g.zeta);
  f("/psf/gentle/alpha_min", g.alpha_min);
  f("/psf/gentle/alpha_max", g.alpha_max);
  f("/psf/gentle/beta_min", g.beta_min);
  f("/psf/gentle/beta_max", g.beta_max);
  f("/psf/gentle/gamma_h", g.gamma_h);
  f("/psf/gentle/gamma_h_factor", g.gamma_h_factor);
  f("/psf/gentle/gamma_d", g.gamma_d);
  f("/psf/gentle/stop_tol", g.stop_tol);
  f("/psf/gentle/max_iters", g.max_iters);
  f("/psf/optics/emission_um", c.optics.emission_um);
  f("/psf/optics/numerical_aperture", c.optics.numerical_aperture);
  f("/psf/optics/refractive_index", c.optics.refractive_index);

  f("/noise/s", c.noise.s);
  f("/noise/levels", c.noise.levels);
  f("/noise/weighted", c.noise.weighted);
  f("/noise/min_count", c.noise.min_count);

  f("/restore/delta", c.restoration.delta);
  f("/restore/bound", c.restoration.bound);
  f("/restore/weight_smooth", c.restoration.weight_smooth);
  f("/restore/boundary", c.restoration.boundary);
  f("/restore/schedule/gamma_scale", c.schedule.gamma_scale);
  f("/restore/schedule/gamma_power", c.schedule.gamma_power);
  f("/restore/schedule/eps_scale", c.schedule.eps_scale);
  f("/restore/schedule/eps_power", c.schedule.eps_power);
  f("/restore/schedule/max_outer", c.schedule.max_outer);
  f("/restore/schedule/max_inner", c.schedule.max_inner);
  f("/restore/rl_iters", c.rl.iters);

  f("/sweep/chi_min", c.sweep.chi_min);
  f("/sweep/chi_max", c.sweep.chi_max);
  f("/sweep/chi_count", c.sweep.chi_count);
  f("/sweep/delta", c.sweep.penalized.delta);
  f("/sweep/iters", c.sweep.penalized.iters);
  f("/sweep/stages", c.sweep.penalized.stages);
}

void reject_unknown(const json& in, const json& ref, const std::string& path) {
  if (!in.is_object()) throw ConfigError("config " + (path.empty() ? "/" : path) + ": expected an object");
  for (const auto& [key, value] : in.items()) {
    const std::string p = path + "/" + key;
    if (!ref.contains(key)) throw ConfigError("config: unknown key " + p);
    if (ref.at(key).is_object()) reject_unknown(value, ref.at(key), p);
  }
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
  json in;
  try {
    in = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  json ref;
  visit(cfg, Dump{ref});
  reject_unknown(in, ref, "");
  visit(cfg, Load{in});
  cfg.bead_sim.seed = cfg.seed;
  cfg.restoration_sim.seed = cfg.seed;
  cfg.sweep.penalized.boundary = cfg.restoration.boundary;
  cfg.rl.boundary = cfg.restoration.boundary;
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const PipelineConfig& cfg) {
  PipelineConfig c = cfg;
  json out;
  visit(c, Dump{out});
  return out.dump(2) + "\n";
}

}  // namespace psfdecon
