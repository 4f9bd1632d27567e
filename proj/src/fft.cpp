#include "psfdecon/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

namespace psfdecon {

namespace {
// FFTW planning is not thread safe; execution with private buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct Fft3::Plans {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  Index n_real = 0;
  Index n_spec = 0;

  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    fftw_free(real);
    fftw_free(spec);
  }
};

Fft3::Fft3(const Dims& dims) : dims_(dims), plans_(std::make_unique<Plans>()) {
  if (dims.count() <= 0) throw ShapeError("Fft3: empty dims");
  plans_->n_real = dims.count();
  plans_->n_spec = spectrum_size();
  plans_->real = fftw_alloc_real(static_cast<size_t>(plans_->n_real));
  plans_->spec = fftw_alloc_complex(static_cast<size_t>(plans_->n_spec));
  // FFTW is row-major with the last index fastest, so pass (nz, ny, nx).
  const int n0 = static_cast<int>(dims.nz);
  const int n1 = static_cast<int>(dims.ny);
  const int n2 = static_cast<int>(dims.nx);
  std::lock_guard<std::mutex> lock(planner_mutex());
  plans_->fwd = fftw_plan_dft_r2c_3d(n0, n1, n2, plans_->real, plans_->spec, FFTW_ESTIMATE);
  plans_->inv = fftw_plan_dft_c2r_3d(n0, n1, n2, plans_->spec, plans_->real, FFTW_ESTIMATE);
}

Fft3::~Fft3() = default;
Fft3::Fft3(Fft3&&) noexcept = default;
Fft3& Fft3::operator=(Fft3&&) noexcept = default;

void Fft3::forward(const Eigen::Ref<const Eigen::ArrayXd>& in, Eigen::ArrayXcd& out) {
  if (in.size() != plans_->n_real) throw ShapeError("Fft3::forward: input length mismatch");
  std::memcpy(plans_->real, in.data(), sizeof(double) * static_cast<size_t>(plans_->n_real));
  fftw_execute(plans_->fwd);
  out.resize(plans_->n_spec);
  std::memcpy(reinterpret_cast<void*>(out.data()), plans_->spec,
              sizeof(fftw_complex) * static_cast<size_t>(plans_->n_spec));
}

void Fft3::inverse(const Eigen::Ref<const Eigen::ArrayXcd>& in, Eigen::ArrayXd& out) {
  if (in.size() != plans_->n_spec) throw ShapeError("Fft3::inverse: spectrum length mismatch");
  std::memcpy(plans_->spec, in.data(), sizeof(fftw_complex) * static_cast<size_t>(plans_->n_spec));
  // c2r destroys its input; the private buffer absorbs that.
  fftw_execute(plans_->inv);
  out.resize(plans_->n_real);
  const double scale = 1.0 / static_cast<double>(plans_->n_real);
  Eigen::Map<const Eigen::ArrayXd> r(plans_->real, plans_->n_real);
  out = r * scale;
}

Index fft_friendly_size(Index n) {
  if (n <= 1) return 1;
  for (Index m = n;; ++m) {
    Index r = m;
    for (Index p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace psfdecon
