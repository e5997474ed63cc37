#pragma once

#include "fga/potential.hpp"
#include "fga/wavefield.hpp"

namespace fga {

// Strang-split spectral solver for i eps psi_t = -eps^2/2 psi_xx + (V(x/eps) + U(x)) psi
// on the periodic interval [0, L). d = 1 only.
struct ReferenceConfig {
  double eps = 1.0 / 32;
  double length = 1.0;
  int points = 0;
  double dt = 0.0;  // step bound; the step used is T / ceil(|T| / dt)
  PeriodicPotential v = PeriodicPotential::zero(1);
  ExternalPotential u = ExternalPotential::zero(1);
  double T = 0.0;  // may be negative

  // dx <= eps/32, dt <= eps/20, L/eps integer; throws kResolution.
  void validate() const;
  // dx = eps/32 and dt = eps/(20 * dt_divisor). Strang phase error grows like
  // (T/eps) (dt/eps)^2, so long runs need a divisor well above 1.
  static ReferenceConfig resolved(double eps, double length, double T, PeriodicPotential v, ExternalPotential u,
                                  double dt_divisor = 1.0);
  // Working set of the solver in bytes.
  std::size_t memory_bytes() const;
};

struct ReferenceStats {
  long steps = 0;
  double step = 0.0;
  double norm_drift = 0.0;  // | |psi(T)| - |psi0| |
};

WaveField reference_propagate(const WaveField& psi0, const ReferenceConfig& cfg, ReferenceStats* stats = nullptr);

}  // namespace fga
