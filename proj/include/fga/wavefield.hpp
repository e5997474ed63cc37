#pragma once

#include "fga/common.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fga {

// Samples of psi on the periodic grid x_j = j * L / N per axis over [0, L)^d,
// row-major with axis 0 slowest.
struct WaveField {
  int dim = 1;
  int points = 0;  // per axis
  double length = 1.0;
  double eps = 1.0;
  double time = 0.0;
  std::vector<cplx> data;

  WaveField() = default;
  WaveField(int dim, int points, double length, double eps, double time = 0.0);

  double spacing() const { return length / points; }
  double cell_volume() const { return std::pow(spacing(), dim); }
  std::size_t size() const { return data.size(); }
  // Number of lattice cells per axis, L / eps.
  int cells() const;
  // Grid points per lattice cell; throws unless N is a multiple of L / eps.
  int points_per_cell() const;
  Vec position(std::size_t flat) const;
  std::size_t flat(const IVec& idx) const;  // wrapped periodically

  bool same_grid(const WaveField& other) const;
  // Validates the shape, eps in (0, 1], L / eps integral.
  void validate() const;

  double norm() const;
  WaveField& operator+=(const WaveField& other);
  WaveField& operator*=(cplx s);
};

// Samples f(x) on the field grid.
template <class Fn>
void fill(WaveField& w, Fn&& f) {
  for (std::size_t i = 0; i < w.size(); ++i) w.data[i] = f(w.position(i));
}

struct Distance {
  double absolute = 0.0;
  double relative = 0.0;  // absolute / |b|, or absolute when |b| = 0
};

// |a - b| by the rectangle rule. Grids, eps and times must agree.
Distance l2_distance(const WaveField& a, const WaveField& b);

// Binary format: "FGAWF1", u32 d, u32 N per axis, f64 L, f64 eps, f64 t, then
// interleaved f64 (re, im). Little-endian.
void write_wavefield(std::ostream& out, const WaveField& w);
WaveField read_wavefield(std::istream& in);
void save_wavefield(const std::string& path, const WaveField& w);
WaveField load_wavefield(const std::string& path);

// x..., |psi|^2 per row.
void write_density_csv(std::ostream& out, const WaveField& w);

}  // namespace fga
