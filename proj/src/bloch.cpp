#include "fga/bloch.hpp"

#include "fga/errors.hpp"
#include "fga/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

namespace fga {

std::size_t BrillouinGrid::size() const {
  std::size_t n = 1;
  for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(nodes_per_axis);
  return n;
}

IVec BrillouinGrid::index(std::size_t flat) const {
  IVec idx{0, 0};
  for (int a = dim - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % nodes_per_axis);
    flat /= nodes_per_axis;
  }
  return idx;
}

std::size_t BrillouinGrid::flat(IVec idx) const {
  std::size_t f = 0;
  for (int a = 0; a < dim; ++a) {
    int j = idx[a] % nodes_per_axis;
    if (j < 0) j += nodes_per_axis;
    f = f * nodes_per_axis + static_cast<std::size_t>(j);
  }
  return f;
}

Vec BrillouinGrid::node(std::size_t flat_index) const {
  const IVec idx = index(flat_index);
  Vec xi(dim);
  for (int a = 0; a < dim; ++a) xi[a] = -kPi + idx[a] * spacing();
  return xi;
}

std::size_t BrillouinGrid::neighbor(std::size_t flat_index, int axis, int step) const {
  IVec idx = index(flat_index);
  idx[axis] += step;
  return flat(idx);
}

PlaneWaveBasis::PlaneWaveBasis(int dim, int cutoff) : dim_(dim), cutoff_(cutoff), size_(1) {
  if (dim < 1 || dim > kMaxDim) fail(ErrorKind::kInvalidInput, "basis dimension must be 1 or 2");
  if (cutoff < 0) fail(ErrorKind::kCutoff, "negative plane-wave cutoff");
  for (int a = 0; a < dim; ++a) size_ *= static_cast<std::size_t>(2 * cutoff + 1);
}

IVec PlaneWaveBasis::k(std::size_t i) const {
  const int width = 2 * cutoff_ + 1;
  IVec k{0, 0};
  for (int a = dim_ - 1; a >= 0; --a) {
    k[a] = static_cast<int>(i % width) - cutoff_;
    i /= width;
  }
  return k;
}

long PlaneWaveBasis::index(const IVec& k) const {
  const int width = 2 * cutoff_ + 1;
  long i = 0;
  for (int a = 0; a < dim_; ++a) {
    if (std::abs(k[a]) > cutoff_) return -1;
    i = i * width + (k[a] + cutoff_);
  }
  return i;
}

Eigen::MatrixXcd assemble_bloch_hamiltonian(const Vec& xi, const PeriodicPotential& v, int cutoff) {
  if (xi.size() != v.dim()) fail(ErrorKind::kInvalidInput, "quasi-momentum dimension differs from potential");
  if (!v.is_hermitian()) fail(ErrorKind::kInvalidInput, "periodic potential is not real-valued (non-Hermitian)");
  if (cutoff < v.cutoff()) {
    fail(ErrorKind::kCutoff, "plane-wave cutoff K=" + std::to_string(cutoff) + " below potential cutoff K_V=" +
                                 std::to_string(v.cutoff()));
  }
  const PlaneWaveBasis basis(v.dim(), cutoff);
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const IVec ki = basis.k(static_cast<std::size_t>(i));
    double kinetic = 0.0;
    for (int a = 0; a < v.dim(); ++a) {
      const double q = kTwoPi * ki[a] + xi[a];
      kinetic += 0.5 * q * q;
    }
    h(i, i) = kinetic + v.coefficient({0, 0}).real();
  }
  for (const auto& [m, vm] : v.coefficients()) {
    if (m == IVec{0, 0}) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      const IVec kj = basis.k(static_cast<std::size_t>(j));
      const long i = basis.index({kj[0] + m[0], kj[1] + m[1]});
      if (i < 0) continue;
      h(i, j) = vm;  // <e_{k_j + m}, V e_{k_j}> = Vhat_m
    }
  }
  // Exact Hermitian symmetry (roundoff-free by construction).
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) h(j, i) = std::conj(h(i, j));
  return h;
}

const char* to_string(GaugeStatus status) {
  switch (status) {
    case GaugeStatus::kUnfixed: return "unfixed";
    case GaugeStatus::kContinuous: return "continuous";
    case GaugeStatus::kDegenerate: return "degenerate";
    case GaugeStatus::kFailed: return "failed";
  }
  return "unknown";
}

bool BandTable::gauge_fixed() const {
  return !gauge.empty() &&
         std::none_of(gauge.begin(), gauge.end(), [](GaugeStatus s) { return s == GaugeStatus::kUnfixed; });
}

bool BandTable::band_usable(int band) const {
  return band >= 0 && band < n_bands && gauge[band] == GaugeStatus::kContinuous;
}

BandTable solve_bands(const BrillouinGrid& grid, const PeriodicPotential& v, int n_bands, int cutoff,
                      int threads) {
  if (grid.dim != v.dim()) fail(ErrorKind::kInvalidInput, "grid and potential dimensions differ");
  if (grid.nodes_per_axis < 4) fail(ErrorKind::kInvalidInput, "need at least 4 Brillouin nodes per axis");
  const PlaneWaveBasis basis(v.dim(), cutoff);
  if (n_bands < 1 || static_cast<std::size_t>(n_bands) > basis.size()) {
    fail(ErrorKind::kInvalidInput, "n_bands must lie in [1, (2K+1)^d]");
  }
  BandTable table;
  table.grid = grid;
  table.cutoff = cutoff;
  table.n_bands = n_bands;
  table.potential = v;
  const std::size_t nodes = grid.size();
  table.energies.resize(n_bands + 1, static_cast<Eigen::Index>(nodes));
  table.vectors.resize(nodes);

  parallel_for(nodes, threads, [&](std::size_t node) {
    const Eigen::MatrixXcd h = assemble_bloch_hamiltonian(grid.node(node), v, cutoff);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
    if (solver.info() != Eigen::Success) {
      fail(ErrorKind::kNumeric, "eigensolver did not converge at Brillouin node " + std::to_string(node));
    }
    const auto& evals = solver.eigenvalues();
    for (int n = 0; n <= n_bands; ++n) {
      table.energies(n, static_cast<Eigen::Index>(node)) =
          n < evals.size() ? evals[n] : std::numeric_limits<double>::infinity();
    }
    table.vectors[node] = solver.eigenvectors().leftCols(n_bands);
  });

  table.min_gap.assign(n_bands, std::numeric_limits<double>::infinity());
  for (int n = 0; n < n_bands; ++n) {
    for (std::size_t node = 0; node < nodes; ++node) {
      const auto c = static_cast<Eigen::Index>(node);
      double gap = table.energies(n + 1, c) - table.energies(n, c);
      if (n > 0) gap = std::min(gap, table.energies(n, c) - table.energies(n - 1, c));
      table.min_gap[n] = std::min(table.min_gap[n], gap);
    }
  }
  table.gauge.assign(n_bands, GaugeStatus::kUnfixed);
  table.holonomy.assign(n_bands, Vec::Zero(grid.dim));
  table.continuity_residual.assign(n_bands, 0.0);
  return table;
}

namespace {

double local_gap(const BandTable& t, int band, std::size_t node) {
  const auto c = static_cast<Eigen::Index>(node);
  double gap = t.energies(band + 1, c) - t.energies(band, c);
  if (band > 0) gap = std::min(gap, t.energies(band, c) - t.energies(band - 1, c));
  return gap;
}

cplx unit_phase(cplx z) {
  const double r = std::abs(z);
  return r > 0.0 ? z / r : cplx{1.0, 0.0};
}

int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Phase of <c(last on line), c(first on line) shifted by +e_axis>.
double seam_phase(const BandTable& t, int band, IVec on_line, int axis) {
  const PlaneWaveBasis basis = t.basis();
  IVec last = on_line;
  last[axis] = t.grid.nodes_per_axis - 1;
  IVec first = on_line;
  first[axis] = 0;
  IVec unit{0, 0};
  unit[axis] = 1;
  const Eigen::VectorXcd next = shift_coefficients(t.coefficients(band, t.grid.flat(first)), basis, unit);
  return std::arg(t.coefficients(band, t.grid.flat(last)).dot(next));
}

// Node vector at an unwrapped index, continued across the zone boundary by
// the k-shift and the line's seam phase.
Eigen::VectorXcd continued_vector(const BandTable& t, int band, const IVec& idx) {
  const int m_nodes = t.grid.nodes_per_axis;
  IVec wrapped = idx;
  IVec winding{0, 0};
  for (int a = 0; a < t.grid.dim; ++a) {
    winding[a] = floor_div(idx[a], m_nodes);
    wrapped[a] = idx[a] - winding[a] * m_nodes;
  }
  Eigen::VectorXcd v = t.coefficients(band, t.grid.flat(wrapped));
  const PlaneWaveBasis basis = t.basis();
  for (int a = 0; a < t.grid.dim; ++a) {
    if (winding[a] == 0) continue;
    IVec shift{0, 0};
    shift[a] = winding[a];
    const double phi = seam_phase(t, band, wrapped, a);
    v = shift_coefficients(v, basis, shift) * std::polar(1.0, -winding[a] * phi);
  }
  return v;
}

}  // namespace

Eigen::VectorXcd shift_coefficients(const Eigen::VectorXcd& c, const PlaneWaveBasis& basis, const IVec& m) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(c.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const IVec k = basis.k(i);
    const long j = basis.index({k[0] + m[0], k[1] + m[1]});
    if (j >= 0) out[static_cast<Eigen::Index>(i)] = c[j];
  }
  return out;
}

Eigen::VectorXcd neighbor_coefficients(const BandTable& table, int band, std::size_t node, int axis, int step) {
  IVec idx = table.grid.index(node);
  idx[axis] += step;
  return continued_vector(table, band, idx);
}

BandTable fix_gauge(BandTable table, const GaugeOptions& options) {
  const BrillouinGrid& g = table.grid;
  const int m = g.nodes_per_axis;
  for (int band = 0; band < table.n_bands; ++band) {
    GaugeStatus status = GaugeStatus::kContinuous;
    for (std::size_t node = 0; node < g.size(); ++node) {
      if (local_gap(table, band, node) < options.degeneracy_tolerance) status = GaugeStatus::kDegenerate;
    }
    auto align = [&](std::size_t from, std::size_t to) {
      const cplx overlap = table.coefficients(band, from).dot(table.coefficients(band, to));
      if (std::abs(overlap) < options.min_overlap) {
        const bool degenerate = local_gap(table, band, from) < options.degeneracy_tolerance ||
                                local_gap(table, band, to) < options.degeneracy_tolerance;
        if (!degenerate) {
          status = GaugeStatus::kFailed;
        } else if (status != GaugeStatus::kFailed) {
          status = GaugeStatus::kDegenerate;
        }
        if (std::abs(overlap) == 0.0) return;
      }
      table.vectors[to].col(band) *= std::conj(unit_phase(overlap));
    };
    if (g.dim == 1) {
      for (int j = 0; j + 1 < m; ++j) align(g.flat({j, 0}), g.flat({j + 1, 0}));
    } else {
      for (int j0 = 0; j0 + 1 < m; ++j0) align(g.flat({j0, 0}), g.flat({j0 + 1, 0}));
      for (int j0 = 0; j0 < m; ++j0)
        for (int j1 = 0; j1 + 1 < m; ++j1) align(g.flat({j0, j1}), g.flat({j0, j1 + 1}));
    }
    Vec hol(g.dim);
    for (int a = 0; a < g.dim; ++a) hol[a] = seam_phase(table, band, IVec{0, 0}, a);
    table.holonomy[band] = hol;

    double residual = 0.0;
    for (std::size_t node = 0; node < g.size(); ++node) {
      const IVec idx = g.index(node);
      for (int a = 0; a < g.dim; ++a) {
        if (idx[a] + 1 >= m) continue;
        const std::size_t next = g.neighbor(node, a, 1);
        if (local_gap(table, band, node) < options.degeneracy_tolerance ||
            local_gap(table, band, next) < options.degeneracy_tolerance) {
          continue;
        }
        const cplx overlap = table.coefficients(band, node).dot(table.coefficients(band, next));
        if (overlap.real() < 0.0) status = status == GaugeStatus::kContinuous ? GaugeStatus::kFailed : status;
        residual = std::max(residual, std::abs(overlap.imag()));
      }
    }
    table.continuity_residual[band] = residual;
    if (status == GaugeStatus::kContinuous && residual > table.continuity_tolerance) status = GaugeStatus::kFailed;
    table.gauge[band] = status;
    if (options.strict && status != GaugeStatus::kContinuous) {
      fail(ErrorKind::kGauge, "band " + std::to_string(band + 1) + " gauge " + to_string(status) +
                                  " (grid too coarse or band crossing)");
    }
  }
  return table;
}

BerrySamples berry_connection(const BandTable& table, double fd_step, int threads) {
  if (!table.gauge_fixed()) fail(ErrorKind::kGauge, "berry_connection requires a gauge-fixed table");
  const BrillouinGrid& g = table.grid;
  const double h = g.spacing();
  BerrySamples out;
  out.fd_step = fd_step;
  out.connection.assign(table.n_bands, std::vector<Vec>(g.size(), Vec::Zero(g.dim)));
  out.imaginary = out.connection;
  std::vector<double> grid_imag(g.size(), 0.0);
  std::vector<double> local_imag(g.size(), 0.0);

  parallel_for(g.size(), threads, [&](std::size_t node) {
    for (int a = 0; a < g.dim; ++a) {
      std::array<Eigen::MatrixXcd, 4> local;
      const std::array<double, 4> offsets{2.0, 1.0, -1.0, -2.0};
      for (int s = 0; s < 4; ++s) {
        Vec xi = g.node(node);
        xi[a] += offsets[s] * fd_step;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(
            assemble_bloch_hamiltonian(xi, table.potential, table.cutoff));
        if (solver.info() != Eigen::Success) {
          fail(ErrorKind::kNumeric, "eigensolver did not converge near Brillouin node " + std::to_string(node));
        }
        local[s] = solver.eigenvectors().leftCols(table.n_bands);
      }
      for (int band = 0; band < table.n_bands; ++band) {
        const auto c = table.coefficients(band, node);
        const Eigen::VectorXcd dc =
            (-neighbor_coefficients(table, band, node, a, 2) + 8.0 * neighbor_coefficients(table, band, node, a, 1) -
             8.0 * neighbor_coefficients(table, band, node, a, -1) + neighbor_coefficients(table, band, node, a, -2)) /
            (12.0 * h);
        const cplx raw = cplx(0.0, 1.0) * c.dot(dc);
        out.connection[band][node][a] = raw.real();
        const bool checked = table.band_usable(band) && local_gap(table, band, node) > 1e-6;
        if (checked) grid_imag[node] = std::max(grid_imag[node], std::abs(raw.imag()) / std::max(dc.norm(), 1.0));

        // Local parallel transport: neighbours phase-aligned to c.
        Eigen::VectorXcd dl = Eigen::VectorXcd::Zero(c.size());
        const std::array<double, 4> weights{-1.0, 8.0, -8.0, 1.0};
        for (int s = 0; s < 4; ++s) {
          const Eigen::VectorXcd v = local[s].col(band);
          dl += weights[s] * std::conj(unit_phase(c.dot(v))) * v;
        }
        dl /= 12.0 * fd_step;
        const double imag = (cplx(0.0, 1.0) * c.dot(dl)).imag() / std::max(dl.norm(), 1.0);
        out.imaginary[band][node][a] = imag;
        if (checked) local_imag[node] = std::max(local_imag[node], std::abs(imag));
      }
    }
  });
  out.max_imaginary = *std::max_element(local_imag.begin(), local_imag.end());
  out.grid_max_imaginary = *std::max_element(grid_imag.begin(), grid_imag.end());
  return out;
}

GradSamples grad_E(const BandTable& table, double fd_step, int threads) {
  const BrillouinGrid& g = table.grid;
  const PlaneWaveBasis basis = table.basis();
  GradSamples out;
  out.fd_step = fd_step;
  out.gradient.assign(table.n_bands, std::vector<Vec>(g.size(), Vec::Zero(g.dim)));
  std::vector<std::vector<Vec>> fd(table.n_bands, std::vector<Vec>(g.size(), Vec::Zero(g.dim)));

  parallel_for(g.size(), threads, [&](std::size_t node) {
    const Vec xi = g.node(node);
    for (int band = 0; band < table.n_bands; ++band) {
      const auto c = table.coefficients(band, node);
      Vec grad = xi;
      for (std::size_t i = 0; i < basis.size(); ++i) {
        const double w = std::norm(c[static_cast<Eigen::Index>(i)]);
        const IVec k = basis.k(i);
        for (int a = 0; a < g.dim; ++a) grad[a] += w * kTwoPi * k[a];
      }
      out.gradient[band][node] = grad;
    }
    for (int a = 0; a < g.dim; ++a) {
      std::array<Eigen::VectorXd, 4> e;
      const std::array<double, 4> offsets{2.0, 1.0, -1.0, -2.0};
      for (int s = 0; s < 4; ++s) {
        Vec shifted = xi;
        shifted[a] += offsets[s] * fd_step;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(
            assemble_bloch_hamiltonian(shifted, table.potential, table.cutoff), Eigen::EigenvaluesOnly);
        if (solver.info() != Eigen::Success) {
          fail(ErrorKind::kNumeric, "eigensolver did not converge near Brillouin node " + std::to_string(node));
        }
        e[s] = solver.eigenvalues();
      }
      for (int band = 0; band < table.n_bands; ++band) {
        fd[band][node][a] = (-e[0][band] + 8.0 * e[1][band] - 8.0 * e[2][band] + e[3][band]) / (12.0 * fd_step);
      }
    }
  });

  out.discrepancy.assign(table.n_bands, 0.0);
  double max_grad = 0.0;
  for (int band = 0; band < table.n_bands; ++band) {
    const bool checked = table.gauge[band] != GaugeStatus::kFailed && table.gauge[band] != GaugeStatus::kDegenerate;
    for (std::size_t node = 0; node < g.size(); ++node) {
      // The eigenvalue stencil is not smooth across a degeneracy.
      if (local_gap(table, band, node) < 1e-6) continue;
      const double d = (out.gradient[band][node] - fd[band][node]).cwiseAbs().maxCoeff();
      out.discrepancy[band] = std::max(out.discrepancy[band], d);
      if (checked) max_grad = std::max(max_grad, out.gradient[band][node].cwiseAbs().maxCoeff());
    }
    if (checked) out.max_discrepancy = std::max(out.max_discrepancy, out.discrepancy[band]);
  }
  if (out.max_discrepancy > 1e-4 * (1.0 + max_grad)) {
    fail(ErrorKind::kConsistency, "group velocity identity and eigenvalue differences disagree by " +
                                      format_double(out.max_discrepancy) + " (gauge or resolution problem)");
  }
  return out;
}

std::vector<std::vector<Mat>> hessian_E(const BandTable& table, const GradSamples& grad) {
  const BrillouinGrid& g = table.grid;
  const double h = g.spacing();
  std::vector<std::vector<Mat>> out(table.n_bands, std::vector<Mat>(g.size(), Mat::Zero(g.dim, g.dim)));
  for (int band = 0; band < table.n_bands; ++band) {
    const auto& s = grad.gradient[band];
    for (std::size_t node = 0; node < g.size(); ++node) {
      Mat hess(g.dim, g.dim);
      for (int a = 0; a < g.dim; ++a) {
        const Vec d = (-s[g.neighbor(node, a, 2)] + 8.0 * s[g.neighbor(node, a, 1)] - 8.0 * s[g.neighbor(node, a, -1)] +
                       s[g.neighbor(node, a, -2)]) /
                      (12.0 * h);
        for (int b = 0; b < g.dim; ++b) hess(a, b) = d[b];
      }
      out[band][node] = 0.5 * (hess + hess.transpose());
    }
  }
  return out;
}

Mat hessian_by_perturbation(const PeriodicPotential& v, int cutoff, const Vec& xi, int band) {
  const PlaneWaveBasis basis(v.dim(), cutoff);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(assemble_bloch_hamiltonian(xi, v, cutoff));
  if (solver.info() != Eigen::Success) fail(ErrorKind::kNumeric, "eigensolver did not converge");
  const auto& vecs = solver.eigenvectors();
  const auto& evals = solver.eigenvalues();
  const int d = v.dim();
  const auto n = static_cast<Eigen::Index>(basis.size());
  // Velocity operators are diagonal in the plane-wave basis.
  std::array<Eigen::VectorXd, kMaxDim> vel;
  for (int a = 0; a < d; ++a) {
    vel[a].resize(n);
    for (Eigen::Index i = 0; i < n; ++i) vel[a][i] = kTwoPi * basis.k(static_cast<std::size_t>(i))[a] + xi[a];
  }
  Mat hess = Mat::Identity(d, d);
  const Eigen::VectorXcd cn = vecs.col(band);
  for (Eigen::Index m = 0; m < n; ++m) {
    if (m == band) continue;
    const double de = evals[band] - evals[m];
    if (std::abs(de) < 1e-12) fail(ErrorKind::kNumeric, "degenerate band in sum-over-states Hessian");
    std::array<cplx, kMaxDim> mat{};
    for (int a = 0; a < d; ++a) mat[a] = cn.dot(vel[a].cwiseProduct(vecs.col(m)));
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) hess(a, b) += 2.0 * (mat[a] * std::conj(mat[b])).real() / de;
  }
  return hess;
}

Eigen::VectorXcd bloch_coefficients(const BandTable& table, int band, const Vec& xi) {
  const BrillouinGrid& g = table.grid;
  if (band < 0 || band >= table.n_bands) fail(ErrorKind::kInvalidInput, "band index out of range");
  const double h = g.spacing();
  IVec base{0, 0};
  std::array<double, kMaxDim> frac{0.0, 0.0};
  for (int a = 0; a < g.dim; ++a) {
    const double s = (xi[a] + kPi) / h;
    const double fl = std::floor(s);
    base[a] = static_cast<int>(fl);
    frac[a] = s - fl;
    // Snap roundoff so node queries return the stored vector exactly.
    if (frac[a] < 1e-12) frac[a] = 0.0;
    if (frac[a] > 1.0 - 1e-12) {
      frac[a] = 0.0;
      ++base[a];
    }
  }
  const Eigen::VectorXcd anchor = continued_vector(table, band, base);
  const int corners = 1 << g.dim;
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(anchor.size());
  bool exact = true;
  for (int c = 0; c < corners; ++c) {
    double weight = 1.0;
    IVec idx = base;
    for (int a = 0; a < g.dim; ++a) {
      const bool up = (c >> a) & 1;
      weight *= up ? frac[a] : 1.0 - frac[a];
      idx[a] += up ? 1 : 0;
    }
    if (weight == 0.0) continue;
    if (c != 0) exact = false;
    if (c == 0) {
      acc += weight * anchor;
      continue;
    }
    const Eigen::VectorXcd v = continued_vector(table, band, idx);
    acc += weight * std::conj(unit_phase(anchor.dot(v))) * v;
  }
  if (exact) return anchor;
  return acc / acc.norm();
}

cplx evaluate_plane_waves(const Eigen::VectorXcd& c, const PlaneWaveBasis& basis, const Vec& X) {
  cplx sum{};
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const IVec k = basis.k(i);
    double phase = 0.0;
    for (int a = 0; a < basis.dim(); ++a) phase += kTwoPi * k[a] * X[a];
    sum += c[static_cast<Eigen::Index>(i)] * std::polar(1.0, phase);
  }
  return sum;
}

cplx evaluate_bloch_wave(const BandTable& table, int band, const Vec& xi, const Vec& X) {
  return evaluate_plane_waves(bloch_coefficients(table, band, xi), table.basis(), X);
}

DispersionModel::DispersionModel(const BandTable& table, int band, const GradSamples& grad,
                                 const std::vector<std::vector<Mat>>& hessian, const BerrySamples& berry)
    : grid_(table.grid), band_(band) {
  if (band < 0 || band >= table.n_bands) fail(ErrorKind::kInvalidInput, "band index out of range");
  const std::size_t nodes = grid_.size();
  energy_.resize(nodes);
  for (std::size_t node = 0; node < nodes; ++node) energy_[node] = table.energy(band, node);
  gradient_ = grad.gradient.at(band);
  hessian_ = hessian.at(band);
  berry_ = berry.connection.at(band);
  for (std::size_t node = 0; node < nodes; ++node) {
    max_gradient_ = std::max(max_gradient_, gradient_[node].norm());
    max_hessian_ = std::max(max_hessian_, hessian_[node].operatorNorm());
  }
}

template <class T>
T DispersionModel::interpolate(const std::vector<T>& samples, const Vec& xi, const T& zero) const {
  const double h = grid_.spacing();
  std::array<int, kMaxDim> base{0, 0};
  std::array<std::array<double, 4>, kMaxDim> w{};
  for (int a = 0; a < grid_.dim; ++a) {
    const double s = (wrap_to_zone(xi[a]) + kPi) / h;
    const double fl = std::floor(s);
    base[a] = static_cast<int>(fl);
    const double t = s - fl;
    // Four-point Lagrange weights on nodes base-1 .. base+2.
    w[a][0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    w[a][1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    w[a][2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    w[a][3] = (t + 1.0) * t * (t - 1.0) / 6.0;
  }
  T acc = zero;
  if (grid_.dim == 1) {
    for (int i = 0; i < 4; ++i) acc += w[0][i] * samples[grid_.flat({base[0] - 1 + i, 0})];
  } else {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        acc += (w[0][i] * w[1][j]) * samples[grid_.flat({base[0] - 1 + i, base[1] - 1 + j})];
  }
  return acc;
}

double DispersionModel::energy(const Vec& xi) const { return interpolate(energy_, xi, 0.0); }

Vec DispersionModel::gradient(const Vec& xi) const { return interpolate(gradient_, xi, Vec(Vec::Zero(dim()))); }

Mat DispersionModel::hessian(const Vec& xi) const {
  const Mat h = interpolate(hessian_, xi, Mat(Mat::Zero(dim(), dim())));
  return 0.5 * (h + h.transpose());
}

Vec DispersionModel::berry(const Vec& xi) const { return interpolate(berry_, xi, Vec(Vec::Zero(dim()))); }

void require_isolated(const BandTable& table, int band, const GradSamples& grad, const IsolationPolicy& policy) {
  if (band < 0 || band >= table.n_bands) fail(ErrorKind::kInvalidInput, "band index out of range");
  const std::string name = "band " + std::to_string(band + 1);
  const GaugeStatus status = table.gauge[band];
  if (status == GaugeStatus::kUnfixed) fail(ErrorKind::kGauge, name + " has no fixed gauge");
  if (status == GaugeStatus::kFailed) {
    fail(ErrorKind::kGauge, name + " gauge fixing failed (grid too coarse or band crossing)");
  }
  if (policy.factor <= 0.0) return;
  double max_grad = 0.0;
  for (const auto& g : grad.gradient.at(band)) max_grad = std::max(max_grad, g.norm());
  const double threshold = policy.factor * policy.fd_step * max_grad;
  if (status == GaugeStatus::kDegenerate || table.min_gap[band] < threshold) {
    // Report where the gap closes: every node below the threshold, else the smallest gap.
    std::vector<std::size_t> hits;
    std::size_t worst = 0;
    double worst_gap = std::numeric_limits<double>::infinity();
    for (std::size_t node = 0; node < table.grid.size(); ++node) {
      const double gap = local_gap(table, band, node);
      if (gap < threshold) hits.push_back(node);
      if (gap < worst_gap) {
        worst_gap = gap;
        worst = node;
      }
    }
    if (hits.empty()) hits.push_back(worst);
    std::string where;
    for (std::size_t i = 0; i < hits.size() && i < 6; ++i) {
      const Vec xi = table.grid.node(hits[i]);
      where += i ? ", xi=(" : "xi=(";
      for (int a = 0; a < xi.size(); ++a) where += (a ? "," : "") + format_double(xi[a]);
      where += ")";
    }
    if (hits.size() > 6) where += " and " + std::to_string(hits.size() - 6) + " more nodes";
    fail(ErrorKind::kBandIsolation, name + " intersects a neighbouring band: min gap " + format_double(worst_gap) +
                                        " at " + where + " below threshold " + format_double(threshold));
  }
}

void write_band_csv(std::ostream& out, const BandTable& table, const std::vector<int>& bands, const GradSamples& grad,
                    const BerrySamples& berry) {
  const int d = table.grid.dim;
  out << "band";
  for (int a = 1; a <= d; ++a) out << ",xi_" << a;
  out << ",E";
  for (int a = 1; a <= d; ++a) out << ",dE_" << a;
  for (int a = 1; a <= d; ++a) out << ",A_" << a;
  out << ",min_gap\n";
  for (int band : bands) {
    for (std::size_t node = 0; node < table.grid.size(); ++node) {
      const Vec xi = table.grid.node(node);
      out << band + 1;
      for (int a = 0; a < d; ++a) out << ',' << format_double(xi[a]);
      out << ',' << format_double(table.energy(band, node));
      for (int a = 0; a < d; ++a) out << ',' << format_double(grad.gradient[band][node][a]);
      for (int a = 0; a < d; ++a) out << ',' << format_double(berry.connection[band][node][a]);
      out << ',' << format_double(table.min_gap[band]) << '\n';
    }
  }
}

}  // namespace fga
