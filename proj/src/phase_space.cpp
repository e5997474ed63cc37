#include "fga/phase_space.hpp"

#include "fga/errors.hpp"
#include "fftw_lock.hpp"
#include "fga/parallel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace fga {

namespace {

int pmod(long i, int n) {
  long m = i % n;
  return static_cast<int>(m < 0 ? m + n : m);
}

double transform_constant(int d, double eps) { return std::pow(2.0, 0.25 * d) * std::pow(kTwoPi * eps, -0.75 * d); }

struct AxisWindow {
  long start = 0;  // unwrapped x index of the first weight
  std::vector<double> g;
  std::vector<double> d2;
};

// Unwrapped x-index box covering every window; axes >= d are trivial.
struct Layout {
  int d = 1;
  int points = 0;
  int per_cell = 0;
  double dx = 0.0;
  double eps = 0.0;
  double radius = 0.0;
  std::array<long, 2> lo{0, 0};
  std::array<int, 2> n{1, 1};
  std::array<std::vector<AxisWindow>, 2> windows;

  std::size_t box_size() const { return static_cast<std::size_t>(n[0]) * n[1]; }
  std::size_t field_index(long i0, long i1) const {
    return d == 1 ? pmod(i0, points) : static_cast<std::size_t>(pmod(i0, points)) * points + pmod(i1, points);
  }
  std::size_t cell_index(long i0, long i1) const {
    return d == 1 ? pmod(i0, per_cell) : static_cast<std::size_t>(pmod(i0, per_cell)) * per_cell + pmod(i1, per_cell);
  }
};

Layout make_layout(const WaveField& psi, const PhaseSpaceGrid& grid) {
  if (psi.dim != grid.dim) fail(ErrorKind::kGridMismatch, "wave field and phase-space grid dimensions differ");
  if (std::abs(psi.eps - grid.eps) > 1e-14 * psi.eps) fail(ErrorKind::kGridMismatch, "wave field and grid eps differ");
  if (std::abs(psi.length - grid.length) > 1e-12 * psi.length) {
    fail(ErrorKind::kGridMismatch, "wave field and phase-space grid domain lengths differ");
  }
  grid.validate();
  Layout lay;
  lay.d = psi.dim;
  lay.points = psi.points;
  lay.per_cell = psi.points_per_cell();
  if (lay.per_cell < 8) {
    fail(ErrorKind::kResolution, "x grid has " + std::to_string(lay.per_cell) + " points per eps period, need >= 8");
  }
  lay.dx = psi.spacing();
  lay.eps = psi.eps;
  lay.radius = grid.radius();
  if (2.0 * lay.radius > psi.length) {
    fail(ErrorKind::kInvalidInput, "domain length is below the Gaussian window diameter 2 r_c sqrt(eps)");
  }
  const double r2 = lay.radius * lay.radius;
  for (int a = 0; a < lay.d; ++a) {
    const double q_lo = grid.q_first[a] * grid.dq;
    const double q_hi = (grid.q_first[a] + grid.q_count[a] - 1) * grid.dq;
    lay.lo[a] = static_cast<long>(std::floor((q_lo - lay.radius) / lay.dx)) - 1;
    const long hi = static_cast<long>(std::ceil((q_hi + lay.radius) / lay.dx)) + 1;
    lay.n[a] = static_cast<int>(hi - lay.lo[a] + 1);
    lay.windows[a].resize(grid.q_count[a]);
    for (int i = 0; i < grid.q_count[a]; ++i) {
      const double q = (grid.q_first[a] + i) * grid.dq;
      AxisWindow& w = lay.windows[a][i];
      const long first = static_cast<long>(std::floor((q - lay.radius) / lay.dx));
      const long last = static_cast<long>(std::ceil((q + lay.radius) / lay.dx));
      for (long j = first; j <= last; ++j) {
        const double dist = j * lay.dx - q;
        if (dist * dist > r2) continue;
        if (w.g.empty()) w.start = j;
        w.g.push_back(std::exp(-dist * dist / (2.0 * lay.eps)));
        w.d2.push_back(dist * dist);
      }
    }
  }
  for (int a = lay.d; a < 2; ++a) {
    lay.windows[a].assign(1, AxisWindow{0, {1.0}, {0.0}});
  }
  return lay;
}

void check_table(const BandTable& table, const PhaseSpaceGrid& grid, int band) {
  if (table.grid.dim != grid.dim || table.grid.nodes_per_axis != grid.p_nodes) {
    fail(ErrorKind::kGridMismatch, "phase-space p nodes must coincide with the Brillouin grid of the band table");
  }
  if (band < 0 || band >= table.n_bands) fail(ErrorKind::kInvalidInput, "band index out of range");
}

// u_n(p, j / r) for the r^d distinct sample offsets inside a cell.
std::vector<cplx> cell_samples(const BandTable& table, int band, std::size_t node, int per_cell) {
  const PlaneWaveBasis basis = table.basis();
  const auto c = table.coefficients(band, node);
  const Eigen::VectorXcd coeffs = c;
  const int d = table.grid.dim;
  std::vector<cplx> out(d == 1 ? per_cell : per_cell * per_cell);
  Vec X(d);
  for (std::size_t m = 0; m < out.size(); ++m) {
    if (d == 1) {
      X[0] = static_cast<double>(m) / per_cell;
    } else {
      X[0] = static_cast<double>(m / per_cell) / per_cell;
      X[1] = static_cast<double>(m % per_cell) / per_cell;
    }
    out[m] = evaluate_plane_waves(coeffs, basis, X);
  }
  return out;
}

// exp(-i p_a x / eps) along each axis of the box.
std::array<std::vector<cplx>, 2> axis_phases(const Layout& lay, const Vec& p) {
  std::array<std::vector<cplx>, 2> ph;
  for (int a = 0; a < 2; ++a) {
    ph[a].assign(lay.n[a], cplx{1.0, 0.0});
    if (a >= lay.d) continue;
    for (int k = 0; k < lay.n[a]; ++k) ph[a][k] = std::polar(1.0, -p[a] * (lay.lo[a] + k) * lay.dx / lay.eps);
  }
  return ph;
}

}  // namespace

std::size_t PhaseSpaceGrid::q_size() const {
  std::size_t n = 1;
  for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(q_count[a]);
  return n;
}

std::size_t PhaseSpaceGrid::p_size() const {
  std::size_t n = 1;
  for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(p_nodes);
  return n;
}

Vec PhaseSpaceGrid::q(std::size_t iq) const {
  Vec out(dim);
  if (dim == 1) {
    out[0] = (q_first[0] + static_cast<long>(iq)) * dq;
  } else {
    out[0] = (q_first[0] + static_cast<long>(iq / q_count[1])) * dq;
    out[1] = (q_first[1] + static_cast<long>(iq % q_count[1])) * dq;
  }
  return out;
}

Vec PhaseSpaceGrid::p(std::size_t ip) const {
  const BrillouinGrid g{dim, p_nodes};
  return g.node(ip);
}

void PhaseSpaceGrid::validate() const {
  const double bound = c_g * std::sqrt(eps) * (1.0 + 1e-12);
  if (!(dq > 0.0) || dq > bound || dp() > bound) {
    fail(ErrorKind::kQuadratureRisk, "phase-space spacing dq=" + format_double(dq) + ", dp=" + format_double(dp()) +
                                         " exceeds c_g*sqrt(eps)=" + format_double(c_g * std::sqrt(eps)));
  }
  if (!(r_c > 0.0)) fail(ErrorKind::kInvalidInput, "Gaussian truncation radius must be positive");
}

PhaseSpaceGrid make_phase_space_grid(const WaveField& psi, int brillouin_nodes, double c_g, double r_c,
                                     double support_threshold) {
  psi.validate();
  PhaseSpaceGrid grid;
  grid.dim = psi.dim;
  grid.eps = psi.eps;
  grid.length = psi.length;
  grid.c_g = c_g;
  grid.r_c = r_c;
  grid.p_nodes = brillouin_nodes;
  const int per_torus = static_cast<int>(std::ceil(psi.length / (c_g * std::sqrt(psi.eps)) - 1e-9));
  grid.dq = psi.length / per_torus;
  grid.validate();

  double peak = 0.0;
  for (const cplx& z : psi.data) peak = std::max(peak, std::abs(z));
  std::array<double, 2> lo{psi.length, psi.length}, hi{0.0, 0.0};
  bool any = false;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (peak == 0.0 || std::abs(psi.data[i]) < support_threshold * peak) continue;
    any = true;
    const Vec x = psi.position(i);
    for (int a = 0; a < psi.dim; ++a) {
      lo[a] = std::min(lo[a], x[a]);
      hi[a] = std::max(hi[a], x[a]);
    }
  }
  const double pad = 2.0 * r_c * std::sqrt(psi.eps);
  for (int a = 0; a < psi.dim; ++a) {
    if (!any) {
      grid.q_first[a] = 0;
      grid.q_count[a] = 1;
      continue;
    }
    const long first = static_cast<long>(std::floor((lo[a] - pad) / grid.dq));
    const long last = static_cast<long>(std::ceil((hi[a] + pad) / grid.dq));
    if (last - first + 1 >= per_torus) {
      grid.q_first[a] = 0;
      grid.q_count[a] = per_torus;
    } else {
      grid.q_first[a] = static_cast<int>(first);
      grid.q_count[a] = static_cast<int>(last - first + 1);
    }
  }
  return grid;
}

double WindowedCoefficients::max_abs() const {
  double m = 0.0;
  for (const cplx& z : values) m = std::max(m, std::abs(z));
  return m;
}

double WindowedCoefficients::mass() const {
  double s = 0.0;
  for (const cplx& z : values) s += std::norm(z);
  return s * grid.weight();
}

cplx gaussian_eval(const Vec& q, const Vec& p, double eps, const Vec& x) {
  const Vec d = x - q;
  return std::exp(cplx(-d.squaredNorm() / (2.0 * eps), p.dot(d) / eps));
}

WindowedCoefficients windowed_bloch_transform(const WaveField& psi, const BandTable& table, int band,
                                              const PhaseSpaceGrid& grid, int threads) {
  check_table(table, grid, band);
  const Layout lay = make_layout(psi, grid);
  WindowedCoefficients out;
  out.band = band;
  out.grid = grid;
  out.values.assign(grid.size(), cplx{});
  const double scale = transform_constant(grid.dim, grid.eps) * std::pow(lay.dx, grid.dim);
  const double r2 = lay.radius * lay.radius;
  const std::size_t np = grid.p_size();
  const int nq1 = grid.dim == 1 ? 1 : grid.q_count[1];

  parallel_for(np, threads, [&](std::size_t ip) {
    const Vec p = grid.p(ip);
    const std::vector<cplx> u = cell_samples(table, band, ip, lay.per_cell);
    const auto ph = axis_phases(lay, p);
    std::vector<cplx> a(lay.box_size());
    for (int k0 = 0; k0 < lay.n[0]; ++k0) {
      for (int k1 = 0; k1 < lay.n[1]; ++k1) {
        const long i0 = lay.lo[0] + k0, i1 = lay.lo[1] + k1;
        a[static_cast<std::size_t>(k0) * lay.n[1] + k1] =
            std::conj(u[lay.cell_index(i0, i1)]) * ph[0][k0] * ph[1][k1] * psi.data[lay.field_index(i0, i1)];
      }
    }
    for (std::size_t iq = 0; iq < grid.q_size(); ++iq) {
      const AxisWindow& w0 = lay.windows[0][iq / nq1];
      const AxisWindow& w1 = lay.windows[1][iq % nq1];
      cplx acc{};
      for (std::size_t j0 = 0; j0 < w0.g.size(); ++j0) {
        const std::size_t row = static_cast<std::size_t>(w0.start + j0 - lay.lo[0]) * lay.n[1];
        cplx inner{};
        for (std::size_t j1 = 0; j1 < w1.g.size(); ++j1) {
          if (w0.d2[j0] + w1.d2[j1] > r2) continue;
          inner += w1.g[j1] * a[row + static_cast<std::size_t>(w1.start + j1 - lay.lo[1])];
        }
        acc += w0.g[j0] * inner;
      }
      const Vec q = grid.q(iq);
      out.values[iq * np + ip] = scale * std::polar(1.0, p.dot(q) / grid.eps) * acc;
    }
  });
  return out;
}

WaveField windowed_adjoint(const WindowedCoefficients& coeffs, const BandTable& table, const WaveField& skeleton,
                           int threads) {
  const PhaseSpaceGrid& grid = coeffs.grid;
  check_table(table, grid, coeffs.band);
  const Layout lay = make_layout(skeleton, grid);
  WaveField out(skeleton.dim, skeleton.points, skeleton.length, skeleton.eps, skeleton.time);
  const double scale = transform_constant(grid.dim, grid.eps) * grid.weight();
  const double r2 = lay.radius * lay.radius;
  const std::size_t np = grid.p_size();
  const int nq1 = grid.dim == 1 ? 1 : grid.q_count[1];
  std::vector<cplx> acc(lay.box_size(), cplx{});

  // Fixed block size keeps the summation order independent of the thread count.
  constexpr std::size_t kBlock = 8;
  std::vector<std::vector<cplx>> partial(kBlock);
  for (std::size_t block = 0; block < np; block += kBlock) {
    const std::size_t count = std::min(kBlock, np - block);
    parallel_for(count, threads, [&](std::size_t slot) {
      const std::size_t ip = block + slot;
      std::vector<cplx>& b = partial[slot];
      b.assign(lay.box_size(), cplx{});
      const Vec p = grid.p(ip);
      bool any = false;
      for (std::size_t iq = 0; iq < grid.q_size(); ++iq) {
        const cplx w = coeffs.values[iq * np + ip];
        if (w == cplx{}) continue;
        any = true;
        const cplx coef = w * std::polar(1.0, -p.dot(grid.q(iq)) / grid.eps);
        const AxisWindow& w0 = lay.windows[0][iq / nq1];
        const AxisWindow& w1 = lay.windows[1][iq % nq1];
        for (std::size_t j0 = 0; j0 < w0.g.size(); ++j0) {
          const std::size_t row = static_cast<std::size_t>(w0.start + j0 - lay.lo[0]) * lay.n[1];
          const cplx c0 = coef * w0.g[j0];
          for (std::size_t j1 = 0; j1 < w1.g.size(); ++j1) {
            if (w0.d2[j0] + w1.d2[j1] > r2) continue;
            b[row + static_cast<std::size_t>(w1.start + j1 - lay.lo[1])] += c0 * w1.g[j1];
          }
        }
      }
      if (!any) return;
      const std::vector<cplx> u = cell_samples(table, coeffs.band, ip, lay.per_cell);
      const auto ph = axis_phases(lay, p);
      for (int k0 = 0; k0 < lay.n[0]; ++k0) {
        for (int k1 = 0; k1 < lay.n[1]; ++k1) {
          const std::size_t k = static_cast<std::size_t>(k0) * lay.n[1] + k1;
          if (b[k] == cplx{}) continue;
          b[k] *= u[lay.cell_index(lay.lo[0] + k0, lay.lo[1] + k1)] * std::conj(ph[0][k0] * ph[1][k1]);
        }
      }
    });
    for (std::size_t slot = 0; slot < count; ++slot) {
      if (partial[slot].empty()) continue;
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += partial[slot][k];
      partial[slot].clear();
    }
  }
  for (int k0 = 0; k0 < lay.n[0]; ++k0) {
    for (int k1 = 0; k1 < lay.n[1]; ++k1) {
      const std::size_t k = static_cast<std::size_t>(k0) * lay.n[1] + k1;
      out.data[lay.field_index(lay.lo[0] + k0, lay.lo[1] + k1)] += scale * acc[k];
    }
  }
  return out;
}

WaveField band_projection(const WaveField& psi, const BandTable& table, int band, const PhaseSpaceGrid& grid,
                          int threads) {
  return windowed_adjoint(windowed_bloch_transform(psi, table, band, grid, threads), table, psi, threads);
}

ParsevalReport parseval_check(const WaveField& psi, const BandTable& table, int n_bands, const PhaseSpaceGrid& grid,
                              int threads) {
  ParsevalReport r;
  r.field_norm2 = psi.norm() * psi.norm();
  for (int n = 0; n < n_bands; ++n) r.coefficient_mass += windowed_bloch_transform(psi, table, n, grid, threads).mass();
  return r;
}

BlochEnergies bloch_transform_energies(const WaveField& psi, const PeriodicPotential& v, int cutoff) {
  psi.validate();
  if (psi.dim != v.dim()) fail(ErrorKind::kInvalidInput, "wave field and potential dimensions differ");
  const int d = psi.dim;
  const int n = psi.points;
  const int cells = psi.cells();
  std::vector<cplx> spec(psi.data);
  std::unique_lock<std::mutex> lock(detail::fftw_planner_mutex());
  fftw_plan plan = d == 1 ? fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(spec.data()),
                                             reinterpret_cast<fftw_complex*>(spec.data()), FFTW_FORWARD, FFTW_ESTIMATE)
                          : fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(spec.data()),
                                             reinterpret_cast<fftw_complex*>(spec.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  lock.unlock();
  fftw_execute(plan);
  lock.lock();
  fftw_destroy_plan(plan);
  lock.unlock();
  const double norm = psi.cell_volume() / std::pow(static_cast<double>(n), d);

  const PlaneWaveBasis basis(d, cutoff);
  BlochEnergies out;
  out.per_band.assign(basis.size(), 0.0);
  // Fourier index s = m + k * cells with m the quasi-momentum index.
  const std::size_t n_xi = d == 1 ? cells : static_cast<std::size_t>(cells) * cells;
  std::vector<Eigen::VectorXcd> fibres(n_xi, Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.size())));
  auto split = [&](int s, int& m, int& k) {
    k = static_cast<int>(std::floor((s + 0.5 * cells) / cells));
    m = s - k * cells;
  };
  for (std::size_t i = 0; i < spec.size(); ++i) {
    out.field_norm2 += std::norm(spec[i]) * norm;
    std::array<int, 2> s{0, 0};
    if (d == 1) {
      s[0] = static_cast<int>(i);
    } else {
      s[0] = static_cast<int>(i / n);
      s[1] = static_cast<int>(i % n);
    }
    IVec k{0, 0};
    std::size_t fibre = 0;
    for (int a = 0; a < d; ++a) {
      if (s[a] >= (n + 1) / 2) s[a] -= n;
      int m = 0;
      split(s[a], m, k[a]);
      fibre = fibre * cells + static_cast<std::size_t>(m + cells / 2);
    }
    const long j = basis.index(k);
    if (j < 0) {
      out.outside_cutoff += std::norm(spec[i]) * norm;
      continue;
    }
    fibres[fibre][j] = spec[i];
  }
  for (std::size_t f = 0; f < n_xi; ++f) {
    if (fibres[f].squaredNorm() == 0.0) continue;
    Vec xi(d);
    std::size_t rest = f;
    for (int a = d - 1; a >= 0; --a) {
      xi[a] = kTwoPi * (static_cast<int>(rest % cells) - cells / 2) / cells;
      rest /= cells;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(assemble_bloch_hamiltonian(xi, v, cutoff));
    const Eigen::VectorXcd proj = solver.eigenvectors().adjoint() * fibres[f];
    for (Eigen::Index b = 0; b < proj.size(); ++b) out.per_band[b] += std::norm(proj[b]) * norm;
  }
  return out;
}

WaveField bloch_packet(const BandTable& table, int band, const WaveField& skeleton, const Vec& q0, const Vec& p0,
                       double width) {
  WaveField out(skeleton.dim, skeleton.points, skeleton.length, skeleton.eps, skeleton.time);
  if (q0.size() != out.dim || p0.size() != out.dim) fail(ErrorKind::kInvalidInput, "packet centre has wrong dimension");
  if (!(width > 0.0)) fail(ErrorKind::kInvalidInput, "packet width factor must be positive");
  const Eigen::VectorXcd c = bloch_coefficients(table, band, p0);
  const PlaneWaveBasis basis = table.basis();
  const double s2 = width * width * out.eps;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec x = out.position(i);
    Vec dsp = x - q0;
    for (int a = 0; a < out.dim; ++a) dsp[a] -= out.length * std::round(dsp[a] / out.length);
    out.data[i] = std::exp(cplx(-dsp.squaredNorm() / (2.0 * s2), p0.dot(dsp) / out.eps)) *
                  evaluate_plane_waves(c, basis, x / out.eps);
  }
  const double nrm = out.norm();
  if (nrm == 0.0) fail(ErrorKind::kNumeric, "packet vanishes on the grid");
  out *= 1.0 / nrm;
  return out;
}

std::vector<Seed> threshold_seeds(const WindowedCoefficients& coeffs, double rel) {
  const double cut = rel * coeffs.max_abs();
  std::vector<Seed> seeds;
  const std::size_t np = coeffs.grid.p_size();
  for (std::size_t iq = 0; iq < coeffs.grid.q_size(); ++iq) {
    for (std::size_t ip = 0; ip < np; ++ip) {
      const cplx w = coeffs.values[iq * np + ip];
      if (w == cplx{} || std::abs(w) < cut) continue;
      seeds.push_back({iq, ip, coeffs.grid.q(iq), coeffs.grid.p(ip), w});
    }
  }
  return seeds;
}

WindowedCoefficients thresholded(const WindowedCoefficients& coeffs, double rel) {
  WindowedCoefficients out = coeffs;
  const double cut = rel * coeffs.max_abs();
  for (cplx& w : out.values)
    if (std::abs(w) < cut) w = cplx{};
  return out;
}

void write_coefficients_csv(std::ostream& out, const WindowedCoefficients& coeffs) {
  const int d = coeffs.grid.dim;
  out << "n";
  for (int a = 1; a <= d; ++a) out << ",q_" << a;
  for (int a = 1; a <= d; ++a) out << ",p_" << a;
  out << ",re_w,im_w\n";
  const std::size_t np = coeffs.grid.p_size();
  for (std::size_t iq = 0; iq < coeffs.grid.q_size(); ++iq) {
    for (std::size_t ip = 0; ip < np; ++ip) {
      const cplx w = coeffs.values[iq * np + ip];
      if (w == cplx{}) continue;
      const Vec q = coeffs.grid.q(iq), p = coeffs.grid.p(ip);
      out << coeffs.band + 1;
      for (int a = 0; a < d; ++a) out << ',' << format_double(q[a]);
      for (int a = 0; a < d; ++a) out << ',' << format_double(p[a]);
      out << ',' << format_double(w.real()) << ',' << format_double(w.imag()) << '\n';
    }
  }
}

}  // namespace fga
