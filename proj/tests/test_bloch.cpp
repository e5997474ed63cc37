#include "fga/bloch.hpp"
#include "fga/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

using namespace fga;

namespace {

Vec v1(double x) {
  Vec v(1);
  v << x;
  return v;
}

BandTable cosine_table(int nodes = 64, int bands = 3, int cutoff = 16) {
  return fix_gauge(solve_bands({1, nodes}, PeriodicPotential::cosine(1, 1.0), bands, cutoff));
}

}  // namespace

TEST_CASE("free Hamiltonian is the kinetic diagonal") {
  const Eigen::MatrixXcd h = assemble_bloch_hamiltonian(v1(0.3), PeriodicPotential::zero(1), 2);
  REQUIRE(h.rows() == 5);
  for (int i = 0; i < 5; ++i) {
    const double q = kTwoPi * (i - 2) + 0.3;
    CHECK(h(i, i).real() == doctest::Approx(0.5 * q * q).epsilon(1e-15));
    for (int j = 0; j < 5; ++j)
      if (j != i) CHECK(std::abs(h(i, j)) == 0.0);
  }
}

TEST_CASE("cosine lattice couples neighbouring plane waves by half the amplitude") {
  const Eigen::MatrixXcd h = assemble_bloch_hamiltonian(v1(0.0), PeriodicPotential::cosine(1, 1.0), 3);
  for (int i = 0; i + 1 < 7; ++i) {
    CHECK(h(i, i + 1).real() == doctest::Approx(0.5));
    CHECK(h(i + 1, i).real() == doctest::Approx(0.5));
  }
  CHECK(std::abs(h(0, 2)) == 0.0);
  CHECK((h - h.adjoint()).norm() == 0.0);
}

TEST_CASE("assembly refuses a cutoff below the potential's and a complex potential") {
  std::map<IVec, cplx> coeffs{{{2, 0}, {0.5, 0.0}}, {{-2, 0}, {0.5, 0.0}}};
  const PeriodicPotential v(1, coeffs);
  CHECK_THROWS_AS(assemble_bloch_hamiltonian(v1(0.0), v, 1), Error);
  std::map<IVec, cplx> bad{{{1, 0}, {0.5, 0.0}}, {{-1, 0}, {0.4, 0.0}}};
  try {
    assemble_bloch_hamiltonian(v1(0.0), PeriodicPotential(1, bad), 4);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidInput);
  }
}

TEST_CASE("free bands match the folded parabola") {
  const BandTable t = solve_bands({1, 16}, PeriodicPotential::zero(1), 3, 4);
  for (std::size_t node = 0; node < 16; ++node) {
    const double xi = t.grid.node(node)[0];
    std::vector<double> e;
    for (int k = -4; k <= 4; ++k) e.push_back(0.5 * (kTwoPi * k + xi) * (kTwoPi * k + xi));
    std::sort(e.begin(), e.end());
    for (int n = 0; n < 3; ++n) CHECK(t.energy(n, node) == doctest::Approx(e[n]).epsilon(1e-12));
  }
}

TEST_CASE("cosine band edges match Mathieu characteristic values") {
  // E = (pi^2 / 2) * a(q), q = 1 / pi^2, from scipy.special.mathieu_a / mathieu_b.
  const BandTable t = solve_bands({1, 64}, PeriodicPotential::cosine(1, 1.0), 3, 16);
  const std::size_t zone_edge = 0, zone_center = 32;
  CHECK(t.energy(0, zone_center) == doctest::Approx(-0.025301920999204322).epsilon(1e-9));
  CHECK(t.energy(1, zone_center) == doctest::Approx(19.734987274282147).epsilon(1e-9));
  CHECK(t.energy(2, zone_center) == doctest::Approx(19.760288743852556).epsilon(1e-9));
  CHECK(t.energy(0, zone_edge) == doctest::Approx(4.428549475675508).epsilon(1e-9));
  CHECK(t.energy(1, zone_edge) == doctest::Approx(5.428389101156945).epsilon(1e-9));
}

TEST_CASE("doubling the plane-wave cutoff leaves the low bands unchanged") {
  const auto v = PeriodicPotential::cosine(1, 1.0);
  const BandTable a = solve_bands({1, 32}, v, 3, 32);
  const BandTable b = solve_bands({1, 32}, v, 3, 64);
  CHECK((a.energies.topRows(3) - b.energies.topRows(3)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("two-dimensional separable lattice adds one-dimensional bands") {
  std::map<IVec, cplx> c{{{1, 0}, 0.5}, {{-1, 0}, 0.5}, {{0, 1}, 0.5}, {{0, -1}, 0.5}};
  const BandTable t2 = solve_bands({2, 8}, PeriodicPotential(2, c), 1, 6);
  const BandTable t1 = solve_bands({1, 8}, PeriodicPotential::cosine(1, 1.0), 1, 6);
  for (std::size_t node = 0; node < t2.grid.size(); ++node) {
    const IVec idx = t2.grid.index(node);
    CHECK(t2.energy(0, node) == doctest::Approx(t1.energy(0, idx[0]) + t1.energy(0, idx[1])).epsilon(1e-12));
  }
}

TEST_CASE("parallel transport gauge is continuous and the Zak phase is quantized") {
  const BandTable t = cosine_table();
  for (int n = 0; n < 3; ++n) {
    CHECK(t.gauge[n] == GaugeStatus::kContinuous);
    CHECK(t.continuity_residual[n] < 1e-12);
    // Inversion symmetry pins the loop phase to 0 or pi.
    CHECK(std::abs(std::sin(t.holonomy[n][0])) < 1e-10);
  }
}

TEST_CASE("free lattice bands are flagged degenerate at the crossings") {
  const BandTable t = fix_gauge(solve_bands({1, 16}, PeriodicPotential::zero(1), 3, 4));
  CHECK(t.gauge[0] == GaugeStatus::kDegenerate);
  CHECK(t.gauge[1] == GaugeStatus::kDegenerate);
  CHECK_FALSE(t.band_usable(0));
  GaugeOptions strict;
  strict.strict = true;
  CHECK_THROWS_AS(fix_gauge(solve_bands({1, 16}, PeriodicPotential::zero(1), 2, 4), strict), Error);
}

TEST_CASE("zone shift maps c(xi) onto c(xi + 2 pi)") {
  const auto v = PeriodicPotential::cosine(1, 1.0);
  const PlaneWaveBasis basis(1, 16);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> s0(assemble_bloch_hamiltonian(v1(-0.4), v, 16));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> s1(assemble_bloch_hamiltonian(v1(-0.4 + kTwoPi), v, 16));
  CHECK(s0.eigenvalues()[0] == doctest::Approx(s1.eigenvalues()[0]).epsilon(1e-10));
  const Eigen::VectorXcd shifted = shift_coefficients(s0.eigenvectors().col(0), basis, {1, 0});
  CHECK(std::abs(std::abs(shifted.dot(s1.eigenvectors().col(0))) - 1.0) < 1e-10);
}

TEST_CASE("Berry connection vanishes in one-dimensional parallel transport") {
  const BandTable t = cosine_table();
  const BerrySamples b = berry_connection(t);
  CHECK(b.max_imaginary < 1e-8);
  CHECK(b.grid_max_imaginary > b.max_imaginary);
  for (int n = 0; n < 2; ++n)
    for (std::size_t node = 0; node < t.grid.size(); ++node)
      CHECK(std::abs(b.connection[n][node][0]) < 1e-6);
}

TEST_CASE("group velocity identity agrees with eigenvalue differences") {
  const BandTable t = cosine_table();
  const GradSamples g = grad_E(t);
  CHECK(g.max_discrepancy < 1e-6);
  // Free band: dE/dxi = xi inside the first zone away from crossings.
  const BandTable f = fix_gauge(solve_bands({1, 16}, PeriodicPotential::zero(1), 1, 4));
  const GradSamples gf = grad_E(f);
  for (std::size_t node = 1; node < 16; ++node) CHECK(gf.gradient[0][node][0] == doctest::Approx(f.grid.node(node)[0]));
}

TEST_CASE("grid Hessian agrees with second differences of eigenvalues") {
  const BandTable t = cosine_table(128);
  const auto h = hessian_E(t, grad_E(t));
  const double d = 1e-3;
  for (std::size_t node : {32u, 64u, 96u}) {
    const double xi = t.grid.node(node)[0];
    auto e = [&](double x) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> s(assemble_bloch_hamiltonian(v1(x), t.potential, t.cutoff),
                                                        Eigen::EigenvaluesOnly);
      return s.eigenvalues()[0];
    };
    const double second = (e(xi + d) - 2.0 * e(xi) + e(xi - d)) / (d * d);
    CHECK(h[0][node](0, 0) == doctest::Approx(second).epsilon(1e-5));
    const Mat ref = hessian_by_perturbation(t.potential, t.cutoff, v1(xi), 0);
    CHECK(h[0][node](0, 0) == doctest::Approx(ref(0, 0)).epsilon(1e-6));
  }
}

TEST_CASE("free Hessian is the identity in two dimensions") {
  const BandTable t = fix_gauge(solve_bands({2, 16}, PeriodicPotential::zero(2), 1, 2));
  const auto h = hessian_E(t, grad_E(t));
  const std::size_t interior = t.grid.flat({8, 9});
  CHECK((h[0][interior] - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("interpolated Bloch coefficients reproduce nodes and are continuous across the seam") {
  const BandTable t = cosine_table();
  const Eigen::VectorXcd at_node = bloch_coefficients(t, 0, t.grid.node(10));
  CHECK((at_node - t.coefficients(0, 10)).norm() == 0.0);

  const double h = t.grid.spacing();
  const double edge = kPi;
  const Eigen::VectorXcd below = bloch_coefficients(t, 0, v1(edge - 1e-9));
  const Eigen::VectorXcd above = bloch_coefficients(t, 0, v1(edge + 1e-9));
  CHECK((below - above).norm() < 1e-6);

  // Midpoint value is close to the exact eigenvector up to phase.
  const double mid = t.grid.node(20)[0] + 0.5 * h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> s(assemble_bloch_hamiltonian(v1(mid), t.potential, t.cutoff));
  const Eigen::VectorXcd interp = bloch_coefficients(t, 0, v1(mid));
  CHECK(std::abs(interp.dot(s.eigenvectors().col(0))) > 1.0 - 1e-4);
  CHECK(interp.norm() == doctest::Approx(1.0));
}

TEST_CASE("dispersion model interpolates energy between nodes") {
  const BandTable t = cosine_table(128);
  const GradSamples g = grad_E(t);
  const auto hess = hessian_E(t, g);
  const BerrySamples b = berry_connection(t);
  const DispersionModel model(t, 0, g, hess, b);
  // Away from the zone edge, where band 1 bends sharply towards the gap.
  for (double xi : {-1.234, 0.1, 1.0}) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> s(assemble_bloch_hamiltonian(v1(xi), t.potential, t.cutoff));
    CHECK(std::abs(model.energy(v1(xi)) - s.eigenvalues()[0]) < 1e-8);
    const Mat ref = hessian_by_perturbation(t.potential, t.cutoff, v1(xi), 0);
    CHECK(std::abs(model.hessian(v1(xi))(0, 0) - ref(0, 0)) < 1e-6);
  }
  CHECK(model.energy(v1(0.5)) == doctest::Approx(model.energy(v1(0.5 + kTwoPi))));
}

TEST_CASE("isolation guard refuses crossing bands and reports the location") {
  const BandTable f = fix_gauge(solve_bands({1, 16}, PeriodicPotential::zero(1), 3, 4));
  const GradSamples g = grad_E(f);
  try {
    require_isolated(f, 1, g);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBandIsolation);
    CHECK(std::string(e.what()).find("xi=(") != std::string::npos);
  }
  IsolationPolicy off;
  off.factor = 0.0;
  CHECK_NOTHROW(require_isolated(f, 0, g, off));

  const BandTable t = cosine_table();
  CHECK_NOTHROW(require_isolated(t, 0, grad_E(t)));
}

TEST_CASE("band CSV has one row per node") {
  const BandTable t = cosine_table(8, 2, 8);
  std::ostringstream out;
  write_band_csv(out, t, {0, 1}, grad_E(t), berry_connection(t));
  const std::string s = out.str();
  CHECK(s.rfind("band,xi_1,E,dE_1,A_1,min_gap\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 16);
}

TEST_CASE("recorded holonomy equals the Wilson loop of the raw eigenvectors") {
  const BandTable raw = solve_bands({1, 32}, PeriodicPotential::cosine(1, 0.7), 2, 12);
  const BandTable fixed = fix_gauge(raw);
  const PlaneWaveBasis basis = raw.basis();
  for (int n = 0; n < 2; ++n) {
    cplx loop{1.0, 0.0};
    for (std::size_t j = 0; j + 1 < 32; ++j) loop *= raw.coefficients(n, j).dot(raw.coefficients(n, j + 1));
    loop *= raw.coefficients(n, 31).dot(shift_coefficients(raw.coefficients(n, 0), basis, {1, 0}));
    CHECK(std::abs(std::remainder(std::arg(loop) - fixed.holonomy[n][0], kTwoPi)) < 1e-12);
  }
}

TEST_CASE("plane-wave completeness at a node") {
  const auto v = PeriodicPotential::cosine(1, 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> s(assemble_bloch_hamiltonian(v1(0.37), v, 6));
  Eigen::VectorXcd x(13);
  for (int i = 0; i < 13; ++i) x[i] = cplx(std::sin(1.3 * i + 0.2), std::cos(0.7 * i * i));
  double sum = 0.0;
  for (int n = 0; n < 13; ++n) sum += std::norm(s.eigenvectors().col(n).dot(x));
  CHECK(sum == doctest::Approx(x.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("Bloch waves are cell-periodic and unimodular for the free lattice") {
  const BandTable f = fix_gauge(solve_bands({1, 16}, PeriodicPotential::zero(1), 1, 3));
  for (double x : {0.0, 0.31, 0.77}) {
    CHECK(std::abs(evaluate_bloch_wave(f, 0, v1(0.4), v1(x))) == doctest::Approx(1.0).epsilon(1e-12));
  }
  const BandTable t = cosine_table();
  const cplx a = evaluate_bloch_wave(t, 0, v1(0.9), v1(0.2));
  const cplx b = evaluate_bloch_wave(t, 0, v1(0.9), v1(1.2));
  CHECK(std::abs(a - b) < 1e-12);
}

TEST_CASE("cosine Bloch wave at the zone centre matches a K=64 Fourier sum") {
  const BandTable t = cosine_table();
  const auto v = PeriodicPotential::cosine(1, 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> s(assemble_bloch_hamiltonian(v1(0.0), v, 64));
  const PlaneWaveBasis fine(1, 64);
  const Eigen::VectorXcd ref = s.eigenvectors().col(0);
  const cplx r0 = evaluate_plane_waves(ref, fine, v1(0.0));
  const cplx r5 = evaluate_plane_waves(ref, fine, v1(0.5));
  const cplx u0 = evaluate_bloch_wave(t, 0, v1(0.0), v1(0.0));
  const cplx u5 = evaluate_bloch_wave(t, 0, v1(0.0), v1(0.5));
  // Phase-free comparison.
  CHECK(std::abs(u0) == doctest::Approx(std::abs(r0)).epsilon(1e-10));
  CHECK(std::abs(u5) == doctest::Approx(std::abs(r5)).epsilon(1e-10));
  CHECK(std::abs(u5 / u0 - r5 / r0) < 1e-10);
}

TEST_CASE("inversion-symmetric lattice has vanishing Berry connection on the reflected grid too") {
  const BandTable t = cosine_table();
  const BerrySamples b = berry_connection(t);
  std::map<IVec, cplx> c{{{1, 0}, 0.5}, {{-1, 0}, 0.5}};
  const BandTable reflected = fix_gauge(solve_bands({1, 64}, PeriodicPotential(1, c), 3, 16));
  const BerrySamples br = berry_connection(reflected);
  for (std::size_t j = 0; j < 64; ++j) {
    CHECK(std::abs(b.connection[0][j][0]) <= 1e-6);
    CHECK(std::abs(b.connection[0][j][0] - br.connection[0][(64 - j) % 64][0]) <= 1e-6);
  }
}
