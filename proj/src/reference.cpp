#include "fga/reference.hpp"

#include "fga/errors.hpp"
#include "fftw_lock.hpp"

#include <fftw3.h>

#include <cmath>
#include <vector>

namespace fga {

void ReferenceConfig::validate() const {
  if (!(eps > 0.0 && eps <= 1.0)) fail(ErrorKind::kInvalidInput, "eps must lie in (0, 1]");
  if (v.dim() != 1 || u.dim() != 1) fail(ErrorKind::kInvalidInput, "reference solver is one-dimensional");
  const double cells = length / eps;
  if (!(length > 0.0) || std::abs(cells - std::round(cells)) > 1e-9 * cells) {
    fail(ErrorKind::kResolution, "L/eps = " + format_double(cells) + " is not an integer");
  }
  if (points <= 0 || length / points > eps / 32.0 * (1.0 + 1e-12)) {
    fail(ErrorKind::kResolution, "dx = " + format_double(points > 0 ? length / points : 0.0) +
                                     " exceeds eps/32 = " + format_double(eps / 32.0));
  }
  if (!(dt > 0.0) || dt > eps / 20.0 * (1.0 + 1e-12)) {
    fail(ErrorKind::kResolution, "dt = " + format_double(dt) + " outside (0, eps/20 = " + format_double(eps / 20.0) + "]");
  }
}

ReferenceConfig ReferenceConfig::resolved(double eps, double length, double T, PeriodicPotential v,
                                          ExternalPotential u, double dt_divisor) {
  if (!(dt_divisor >= 1.0)) fail(ErrorKind::kInvalidInput, "dt divisor must be >= 1");
  ReferenceConfig c;
  c.eps = eps;
  c.length = length;
  c.T = T;
  c.v = std::move(v);
  c.u = std::move(u);
  const long cells = std::lround(length / eps);
  c.points = static_cast<int>(cells * 32);
  c.dt = eps / (20.0 * dt_divisor);
  return c;
}

std::size_t ReferenceConfig::memory_bytes() const {
  // field, kinetic phase, two potential phases
  return static_cast<std::size_t>(points) * sizeof(cplx) * 4;
}

WaveField reference_propagate(const WaveField& psi0, const ReferenceConfig& cfg, ReferenceStats* stats) {
  cfg.validate();
  if (psi0.dim != 1) fail(ErrorKind::kInvalidInput, "reference solver is one-dimensional");
  if (psi0.points != cfg.points || std::abs(psi0.length - cfg.length) > 1e-12 * cfg.length ||
      std::abs(psi0.eps - cfg.eps) > 1e-14 * cfg.eps) {
    fail(ErrorKind::kGridMismatch, "initial field does not match the reference grid");
  }
  const int n = cfg.points;
  const long steps = std::max(1L, static_cast<long>(std::ceil(std::abs(cfg.T) / cfg.dt - 1e-9)));
  const double h = cfg.T / steps;
  const double eps = cfg.eps;
  const double dx = cfg.length / n;

  std::vector<cplx> half(n), full(n), kinetic(n);
  for (int j = 0; j < n; ++j) {
    const Vec x = Vec::Constant(1, j * dx);
    const double w = cfg.v(x / eps) + cfg.u.value(x);
    half[j] = std::polar(1.0, -0.5 * w * h / eps);
    full[j] = half[j] * half[j];
    const int m = j < (n + 1) / 2 ? j : j - n;
    const double k = kTwoPi * m / cfg.length;
    kinetic[j] = std::polar(1.0, -0.5 * eps * k * k * h) / static_cast<double>(n);
  }

  WaveField psi = psi0;
  psi.time = psi0.time + cfg.T;
  auto* data = reinterpret_cast<fftw_complex*>(psi.data.data());
  fftw_plan forward, backward;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    forward = fftw_plan_dft_1d(n, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    backward = fftw_plan_dft_1d(n, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (cfg.T != 0.0) {
    for (int j = 0; j < n; ++j) psi.data[j] *= half[j];
    for (long s = 0; s < steps; ++s) {
      fftw_execute(forward);
      for (int j = 0; j < n; ++j) psi.data[j] *= kinetic[j];
      fftw_execute(backward);
      const std::vector<cplx>& phase = s + 1 < steps ? full : half;
      for (int j = 0; j < n; ++j) psi.data[j] *= phase[j];
    }
  }
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  if (stats != nullptr) {
    stats->steps = cfg.T != 0.0 ? steps : 0;
    stats->step = cfg.T != 0.0 ? h : 0.0;
    stats->norm_drift = std::abs(psi.norm() - psi0.norm());
  }
  return psi;
}

}  // namespace fga
