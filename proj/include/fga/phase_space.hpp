#pragma once

#include "fga/bloch.hpp"
#include "fga/common.hpp"
#include "fga/wavefield.hpp"

#include <iosfwd>
#include <vector>

namespace fga {

// q nodes: (first + i) * dq per axis, possibly covering only part of the
// torus. p nodes: the Brillouin nodes -pi + j * 2pi/M.
struct PhaseSpaceGrid {
  int dim = 1;
  double eps = 1.0;
  double length = 1.0;  // torus the q nodes live on
  double c_g = 0.5;
  double r_c = 8.0;
  double dq = 0.0;
  IVec q_first{0, 0};
  IVec q_count{0, 0};
  int p_nodes = 64;

  double dp() const { return kTwoPi / p_nodes; }
  double radius() const { return r_c * std::sqrt(eps); }
  std::size_t q_size() const;
  std::size_t p_size() const;
  std::size_t size() const { return q_size() * p_size(); }
  Vec q(std::size_t iq) const;
  Vec p(std::size_t ip) const;
  double weight() const { return std::pow(dq * dp(), dim); }  // dq^d dp^d
  // Spacing bound dq, dp <= c_g sqrt(eps); throws kQuadratureRisk.
  void validate() const;
};

// q box = support of |psi| (threshold relative to max) padded by 2 r_c sqrt(eps),
// dq = L / ceil(L / (c_g sqrt(eps))) so nodes tile the torus.
PhaseSpaceGrid make_phase_space_grid(const WaveField& psi, int brillouin_nodes, double c_g = 0.5, double r_c = 8.0,
                                     double support_threshold = 1e-8);

struct WindowedCoefficients {
  int band = 0;
  PhaseSpaceGrid grid;
  std::vector<cplx> values;  // [iq * p_size + ip]

  cplx at(std::size_t iq, std::size_t ip) const { return values[iq * grid.p_size() + ip]; }
  double max_abs() const;
  double mass() const;  // sum |w|^2 dq^d dp^d
};

// exp(-|x - q|^2 / (2 eps) + i p.(x - q) / eps)
cplx gaussian_eval(const Vec& q, const Vec& p, double eps, const Vec& x);

// 2^{d/4} (2 pi eps)^{-3d/4} sum_x conj(u_n(p, x/eps)) conj(G_{q,p}(x)) psi(x) dx^d
// with the window cut at r_c sqrt(eps).
WindowedCoefficients windowed_bloch_transform(const WaveField& psi, const BandTable& table, int band,
                                              const PhaseSpaceGrid& grid, int threads = 1);

// Adjoint: 2^{d/4} (2 pi eps)^{-3d/4} sum_{q,p} u_n(p, y/eps) G_{q,p}(y) w(q,p) dq^d dp^d
// on the grid of `skeleton` (its samples are ignored).
WaveField windowed_adjoint(const WindowedCoefficients& coeffs, const BandTable& table, const WaveField& skeleton,
                           int threads = 1);

// Pi_n psi = adjoint(transform(psi)).
WaveField band_projection(const WaveField& psi, const BandTable& table, int band, const PhaseSpaceGrid& grid,
                          int threads = 1);

struct ParsevalReport {
  double field_norm2 = 0.0;
  double coefficient_mass = 0.0;  // sum over bands of |w_n|^2 dq^d dp^d
  double ratio() const { return field_norm2 > 0.0 ? coefficient_mass / field_norm2 : 0.0; }
};

ParsevalReport parseval_check(const WaveField& psi, const BandTable& table, int n_bands, const PhaseSpaceGrid& grid,
                              int threads = 1);

// Non-windowed Bloch transform of a periodic field: |B_n|^2 summed over the
// L/eps quasi-momenta, for every band of the cutoff-K basis (ascending).
struct BlochEnergies {
  std::vector<double> per_band;
  double outside_cutoff = 0.0;  // Fourier mass at |k|_inf > K
  double field_norm2 = 0.0;
};
BlochEnergies bloch_transform_energies(const WaveField& psi, const PeriodicPotential& v, int cutoff);

// Unit-norm packet exp(-|x - q0|^2 / (2 width^2 eps)) exp(i p0.(x - q0) / eps) u_n(p0, x / eps)
// on the torus (min-image displacement).
WaveField bloch_packet(const BandTable& table, int band, const WaveField& skeleton, const Vec& q0, const Vec& p0,
                       double width = 1.0);

struct Seed {
  std::size_t iq = 0;
  std::size_t ip = 0;
  Vec q;
  Vec p;
  cplx w;
};

// Entries with |w| >= rel * max|w|, in (iq, ip) order.
std::vector<Seed> threshold_seeds(const WindowedCoefficients& coeffs, double rel = 1e-8);
// Copy of coeffs with sub-threshold entries zeroed.
WindowedCoefficients thresholded(const WindowedCoefficients& coeffs, double rel = 1e-8);

// n (1-based), q..., p..., Re w, Im w; zero entries skipped.
void write_coefficients_csv(std::ostream& out, const WindowedCoefficients& coeffs);

}  // namespace fga
