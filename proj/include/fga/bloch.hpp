#pragma once

#include "fga/common.hpp"
#include "fga/potential.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fga {

// Uniform periodic grid over the Brillouin zone [-pi, pi)^d. Node j along an
// axis sits at -pi + j * 2pi/M; the node at +pi is the node at -pi.
struct BrillouinGrid {
  int dim = 1;
  int nodes_per_axis = 64;

  double spacing() const { return kTwoPi / nodes_per_axis; }
  std::size_t size() const;
  IVec index(std::size_t flat) const;
  std::size_t flat(IVec idx) const;  // indices are wrapped periodically
  Vec node(std::size_t flat) const;
  std::size_t neighbor(std::size_t flat, int axis, int step) const;
};

// Plane waves exp(2 pi i k.X) with |k|_inf <= K, flattened with axis 0 slowest.
class PlaneWaveBasis {
 public:
  PlaneWaveBasis(int dim, int cutoff);
  int dim() const { return dim_; }
  int cutoff() const { return cutoff_; }
  std::size_t size() const { return size_; }
  IVec k(std::size_t i) const;
  // -1 when k lies outside the cutoff box.
  long index(const IVec& k) const;

 private:
  int dim_;
  int cutoff_;
  std::size_t size_;
};

// H_xi in the plane-wave basis: 0.5 |2 pi k + xi|^2 on the diagonal plus
// Vhat_{k - k'} off it.
Eigen::MatrixXcd assemble_bloch_hamiltonian(const Vec& xi, const PeriodicPotential& v, int cutoff);

enum class GaugeStatus {
  kUnfixed,     // fix_gauge has not run
  kContinuous,  // parallel transport succeeded on every link
  kDegenerate,  // a link touches a node where the band is degenerate
  kFailed,      // small overlap on a non-degenerate link (grid too coarse)
};

const char* to_string(GaugeStatus status);

struct BandTable {
  BrillouinGrid grid;
  int cutoff = 0;
  int n_bands = 0;
  PeriodicPotential potential;

  // (n_bands + 1) x nodes; the extra row is the first excluded band and only
  // feeds the gap of the top band.
  Eigen::MatrixXd energies;
  // Per node: basis-size x n_bands, column n is band n (0-based).
  std::vector<Eigen::MatrixXcd> vectors;
  // Per band: min over the grid of the distance to the neighbouring bands.
  std::vector<double> min_gap;

  std::vector<GaugeStatus> gauge;
  // Per band, per axis: phase of the overlap closing the loop through index 0.
  std::vector<Vec> holonomy;
  // Per band: max |Im <c_j, c_j+1>| over all interior links after fixing.
  std::vector<double> continuity_residual;
  double continuity_tolerance = 0.05;

  PlaneWaveBasis basis() const { return {grid.dim, cutoff}; }
  double energy(int band, std::size_t node) const { return energies(band, node); }
  Eigen::Ref<const Eigen::VectorXcd> coefficients(int band, std::size_t node) const {
    return vectors[node].col(band);
  }
  bool gauge_fixed() const;
  bool band_usable(int band) const;
};

// Lowest n_bands eigenpairs of H_xi at every node. Nodes are independent and
// are spread over `threads` workers.
BandTable solve_bands(const BrillouinGrid& grid, const PeriodicPotential& v, int n_bands, int cutoff,
                      int threads = 1);

struct GaugeOptions {
  double min_overlap = 0.1;
  // A node counts as degenerate for band n when its gap to a neighbour is below this.
  double degeneracy_tolerance = 1e-6;
  // Throw on the first failed band instead of recording the status.
  bool strict = false;
};

// Parallel-transport gauge along axis-ordered sweeps. The loop holonomy is
// recorded per band, not removed.
BandTable fix_gauge(BandTable table, const GaugeOptions& options = {});

// Vector c(xi + 2 pi m) expressed through c(xi): entries move by -m in k.
Eigen::VectorXcd shift_coefficients(const Eigen::VectorXcd& c, const PlaneWaveBasis& basis, const IVec& m);

// Neighbour of `node` along `axis`, transported continuously across the zone
// boundary (shifted in k and phase-aligned to `node`).
Eigen::VectorXcd neighbor_coefficients(const BandTable& table, int band, std::size_t node, int axis,
                                       int step);

struct BerrySamples {
  // [band][node]
  std::vector<std::vector<Vec>> connection;
  // Im of i<c, Dc> per axis, which normalization forces to zero. Measured
  // with D built from eigenvectors re-solved at xi +- fd_step, xi +- 2 fd_step,
  // relative to |Dc|.
  std::vector<std::vector<Vec>> imaginary;
  double max_imaginary = 0.0;  // over usable bands
  // Same quantity with the grid difference; dominated by its truncation error.
  double grid_max_imaginary = 0.0;
  double fd_step = 1e-4;
};

// A_n = Re[i <c_n, D c_n>] with D the fourth-order centered periodic
// difference in xi over the grid.
BerrySamples berry_connection(const BandTable& table, double fd_step = 1e-4, int threads = 1);

struct GradSamples {
  std::vector<std::vector<Vec>> gradient;  // identity route, [band][node]
  std::vector<double> discrepancy;         // per band, vs eigenvalue differences
  double max_discrepancy = 0.0;            // over usable bands
  double fd_step = 1e-3;
};

// Group velocity from -i<u, grad_x u> + xi, checked against five-point
// differences of eigenvalues re-solved at xi +- step, xi +- 2 step.
GradSamples grad_E(const BandTable& table, double fd_step = 1e-3, int threads = 1);

// Symmetrized fourth-order centered periodic difference of the stored
// gradient samples. [band][node]
std::vector<std::vector<Mat>> hessian_E(const BandTable& table, const GradSamples& grad);

// Second derivative of E_n from the sum-over-states identity at a single xi.
// Independent of any grid; used as a cross-check of hessian_E.
Mat hessian_by_perturbation(const PeriodicPotential& v, int cutoff, const Vec& xi, int band);

// Coefficients of u_n(xi, .) for any real xi: multilinear interpolation of
// phase-aligned gauge-fixed node vectors, renormalized, then shifted for xi
// outside the zone. Exact node vectors are returned unchanged.
Eigen::VectorXcd bloch_coefficients(const BandTable& table, int band, const Vec& xi);

// sum_k c_k exp(2 pi i k.X)
cplx evaluate_plane_waves(const Eigen::VectorXcd& c, const PlaneWaveBasis& basis, const Vec& X);
cplx evaluate_bloch_wave(const BandTable& table, int band, const Vec& xi, const Vec& X);

// Smooth periodic interpolants for one isolated band.
class DispersionModel {
 public:
  DispersionModel(const BandTable& table, int band, const GradSamples& grad,
                  const std::vector<std::vector<Mat>>& hessian, const BerrySamples& berry);

  int band() const { return band_; }
  int dim() const { return grid_.dim; }
  const BrillouinGrid& grid() const { return grid_; }
  static constexpr int kInterpolationOrder = 3;

  double energy(const Vec& xi) const;
  Vec gradient(const Vec& xi) const;
  Mat hessian(const Vec& xi) const;
  Vec berry(const Vec& xi) const;

  // Largest sampled |grad E| and operator norm of the Hessian.
  double max_gradient() const { return max_gradient_; }
  double max_hessian() const { return max_hessian_; }

 private:
  template <class T>
  T interpolate(const std::vector<T>& samples, const Vec& xi, const T& zero) const;

  BrillouinGrid grid_;
  int band_;
  std::vector<double> energy_;
  std::vector<Vec> gradient_;
  std::vector<Mat> hessian_;
  std::vector<Vec> berry_;
  double max_gradient_ = 0.0;
  double max_hessian_ = 0.0;
};

// Gap guard: band n is refused when min_gap_n < factor * fd_step * max|grad E_n|
// or when its gauge could not be fixed. factor <= 0 disables the gap test.
struct IsolationPolicy {
  double factor = 10.0;
  double fd_step = 1e-3;
};

void require_isolated(const BandTable& table, int band, const GradSamples& grad,
                      const IsolationPolicy& policy = {});

// Band export, one row per (band, node): band (1-based), xi..., E, dE..., A..., min_gap.
void write_band_csv(std::ostream& out, const BandTable& table, const std::vector<int>& bands,
                    const GradSamples& grad, const BerrySamples& berry);

}  // namespace fga
