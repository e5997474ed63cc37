#include "fga/errors.hpp"
#include "fga/phase_space.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace fga;

namespace {

Vec v1(double x) {
  Vec v(1);
  v << x;
  return v;
}

struct Setup {
  BandTable table;
  WaveField skeleton;
};

// eps = 1/16 on [0, 4): 64 cells, 32 points per cell, M = 64 Brillouin nodes.
const Setup& cosine_setup() {
  static const Setup s{fix_gauge(solve_bands({1, 64}, PeriodicPotential::cosine(1, 1.0), 8, 16)),
                       WaveField(1, 2048, 4.0, 1.0 / 16)};
  return s;
}

const Setup& free_setup() {
  static const Setup s{fix_gauge(solve_bands({1, 64}, PeriodicPotential::zero(1), 1, 4)),
                       WaveField(1, 2048, 4.0, 1.0 / 16)};
  return s;
}

WaveField random_field(const WaveField& skeleton, unsigned seed) {
  WaveField w = skeleton;
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  for (cplx& z : w.data) z = {n(rng), n(rng)};
  return w;
}

// Gaussian packet with min-image displacement on the torus.
cplx periodic_gaussian(double q, double p, double eps, double length, const Vec& x) {
  const double d = x[0] - q - length * std::round((x[0] - q) / length);
  return gaussian_eval(v1(0.0), v1(p), eps, v1(d));
}

cplx inner(const WaveField& a, const WaveField& b) {
  cplx s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a.data[i]) * b.data[i];
  return s * a.cell_volume();
}

}  // namespace

TEST_CASE("semiclassical Gaussian values") {
  CHECK(std::abs(gaussian_eval(v1(0.3), v1(1.0), 0.01, v1(0.3)) - 1.0) < 1e-15);
  const double eps = 0.04;
  CHECK(std::abs(gaussian_eval(v1(0.0), v1(0.0), eps, v1(std::sqrt(2 * eps))) - std::exp(-1.0)) < 1e-15);
  const cplx ref = std::exp(-0.5) * std::polar(1.0, 10.0);
  CHECK(std::abs(gaussian_eval(v1(0.0), v1(1.0), 0.01, v1(0.1)) - ref) < 1e-14);
}

TEST_CASE("phase-space grid respects the spacing bound and tiles the torus") {
  const auto& s = cosine_setup();
  const WaveField psi = bloch_packet(s.table, 0, s.skeleton, v1(2.0), v1(kPi / 4));
  const PhaseSpaceGrid g = make_phase_space_grid(psi, 64);
  CHECK(g.dq <= 0.5 * std::sqrt(g.eps));
  CHECK(g.dp() <= 0.5 * std::sqrt(g.eps));
  const double per_torus = 4.0 / g.dq;
  CHECK(std::abs(per_torus - std::round(per_torus)) < 1e-9);
  CHECK_THROWS_AS(make_phase_space_grid(psi, 32), Error);
}

TEST_CASE("transform refuses an under-resolved x grid or mismatched p nodes") {
  const auto& s = cosine_setup();
  const WaveField coarse(1, 256, 4.0, 1.0 / 16);  // 4 points per cell
  const PhaseSpaceGrid g = make_phase_space_grid(coarse, 64);
  try {
    windowed_bloch_transform(coarse, s.table, 0, g);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kResolution);
  }
  const WaveField psi = bloch_packet(s.table, 0, s.skeleton, v1(2.0), v1(kPi / 4));
  const PhaseSpaceGrid g128 = make_phase_space_grid(psi, 128);
  CHECK_THROWS_AS(windowed_bloch_transform(psi, s.table, 0, g128), Error);
}

TEST_CASE("zero field maps to zero coefficients and zero projection") {
  const auto& s = cosine_setup();
  const PhaseSpaceGrid g = make_phase_space_grid(s.skeleton, 64);
  const WindowedCoefficients w = windowed_bloch_transform(s.skeleton, s.table, 0, g);
  CHECK(w.max_abs() == 0.0);
  CHECK(windowed_adjoint(w, s.table, s.skeleton).norm() == 0.0);
  const ParsevalReport r = parseval_check(s.skeleton, s.table, 2, g);
  CHECK(r.field_norm2 == 0.0);
  CHECK(r.coefficient_mass == 0.0);
}

TEST_CASE("free-lattice transform of a Gaussian is the Gaussian overlap") {
  // |w(q,p)| = 2^{1/4} (2 pi eps)^{-3/4} sqrt(pi eps) exp(-((q-q0)^2 + (p-p0)^2) / (4 eps)).
  const auto& s = free_setup();
  const double eps = s.skeleton.eps, q0 = 2.0, p0 = 0.5;
  WaveField psi = s.skeleton;
  fill(psi, [&](const Vec& x) { return gaussian_eval(v1(q0), v1(p0), eps, x); });
  const PhaseSpaceGrid g = make_phase_space_grid(psi, 64);
  const WindowedCoefficients w = windowed_bloch_transform(psi, s.table, 0, g);
  const double c = std::pow(2.0, 0.25) * std::pow(kTwoPi * eps, -0.75) * std::sqrt(kPi * eps);
  double worst = 0.0;
  for (std::size_t iq = 0; iq < g.q_size(); ++iq) {
    // Windows reaching round the torus see the periodic images instead.
    if (std::abs(g.q(iq)[0] - q0) > 1.0) continue;
    for (std::size_t ip = 0; ip < g.p_size(); ++ip) {
      const double dq = g.q(iq)[0] - q0, dp = g.p(ip)[0] - p0;
      const double ref = c * std::exp(-(dq * dq + dp * dp) / (4 * eps));
      worst = std::max(worst, std::abs(std::abs(w.at(iq, ip)) - ref));
    }
  }
  CHECK(worst < 1e-10 * c);
}

TEST_CASE("transform is linear") {
  const auto& s = cosine_setup();
  const WaveField a = random_field(s.skeleton, 1), b = random_field(s.skeleton, 2);
  const cplx alpha(0.3, -1.1), beta(-2.0, 0.4);
  WaveField mix = a;
  mix *= alpha;
  WaveField tb = b;
  tb *= beta;
  mix += tb;
  const PhaseSpaceGrid g = make_phase_space_grid(a, 64);
  const auto wa = windowed_bloch_transform(a, s.table, 1, g);
  const auto wb = windowed_bloch_transform(b, s.table, 1, g);
  const auto wm = windowed_bloch_transform(mix, s.table, 1, g);
  double worst = 0.0;
  for (std::size_t i = 0; i < wm.values.size(); ++i)
    worst = std::max(worst, std::abs(wm.values[i] - alpha * wa.values[i] - beta * wb.values[i]));
  CHECK(worst < 1e-12 * wm.max_abs());
}

TEST_CASE("band projection is self-adjoint") {
  const auto& s = cosine_setup();
  const WaveField a = random_field(s.skeleton, 3), b = random_field(s.skeleton, 4);
  const PhaseSpaceGrid g = make_phase_space_grid(a, 64);
  const cplx lhs = inner(band_projection(a, s.table, 0, g), b);
  const cplx rhs = inner(a, band_projection(b, s.table, 0, g));
  CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
}

TEST_CASE("eight bands reconstruct a band-1 packet") {
  const auto& s = cosine_setup();
  const WaveField psi = bloch_packet(s.table, 0, s.skeleton, v1(2.0), v1(kPi / 4));
  const PhaseSpaceGrid g = make_phase_space_grid(psi, 64);
  WaveField sum = s.skeleton;
  for (int n = 0; n < 8; ++n) sum += band_projection(psi, s.table, n, g);
  CHECK(l2_distance(sum, psi).relative < 1e-4);
}

TEST_CASE("reconstruction holds for a packet near the zone edge") {
  const auto& s = cosine_setup();
  const WaveField psi = bloch_packet(s.table, 1, s.skeleton, v1(1.3), v1(0.8 * kPi));
  const PhaseSpaceGrid g = make_phase_space_grid(psi, 64);
  WaveField sum = s.skeleton;
  for (int n = 0; n < 8; ++n) sum += band_projection(psi, s.table, n, g);
  CHECK(l2_distance(sum, psi).relative < 1e-4);
}

TEST_CASE("band-1 projection is not idempotent beyond the reconstruction residual" * doctest::should_fail()) {
  // Literal form of the claim |Pi_1^2 phi - Pi_1 phi| <= 2 |sum_n Pi_n psi - psi|.
  // Pi_1 is not a projection; the defect is the cross-band leakage of Pi_1 phi.
  const auto& s = cosine_setup();
  const WaveField phi = bloch_packet(s.table, 0, s.skeleton, v1(2.0), v1(kPi / 4));
  const PhaseSpaceGrid g = make_phase_space_grid(phi, 64);
  const WaveField once = band_projection(phi, s.table, 0, g);
  const WaveField twice = band_projection(once, s.table, 0, g);
  WaveField sum = s.skeleton;
  for (int n = 0; n < 8; ++n) sum += band_projection(once, s.table, n, g);
  CHECK(l2_distance(twice, once).absolute <= 2.0 * l2_distance(sum, once).absolute);
}

TEST_CASE("Pi_1 defect equals the leakage into the other bands") {
  const auto& s = cosine_setup();
  const WaveField phi = bloch_packet(s.table, 0, s.skeleton, v1(2.0), v1(kPi / 4));
  const PhaseSpaceGrid g = make_phase_space_grid(phi, 64);
  const WaveField once = band_projection(phi, s.table, 0, g);
  const WaveField twice = band_projection(once, s.table, 0, g);
  WaveField others = s.skeleton;
  for (int n = 1; n < 8; ++n) others += band_projection(once, s.table, n, g);
  WaveField defect = once;
  defect *= -1.0;
  defect += twice;
  defect += others;
  CHECK(defect.norm() < 1e-10);
  CHECK(l2_distance(twice, once).relative < 1e-4);
}

TEST_CASE("non-windowed Bloch transform satisfies Parseval") {
  const auto& s = cosine_setup();
  const WaveField psi = random_field(s.skeleton, 5);
  const BlochEnergies e = bloch_transform_energies(psi, s.table.potential, 16);
  double sum = e.outside_cutoff;
  for (double v : e.per_band) sum += v;
  CHECK(sum == doctest::Approx(e.field_norm2).epsilon(1e-10));
  CHECK(e.field_norm2 == doctest::Approx(psi.norm() * psi.norm()).epsilon(1e-12));
  const WaveField packet = bloch_packet(s.table, 0, s.skeleton, v1(2.0), v1(kPi / 4));
  const BlochEnergies ep = bloch_transform_energies(packet, s.table.potential, 16);
  double total = ep.outside_cutoff;
  for (double v : ep.per_band) total += v;
  CHECK(std::abs(total - 1.0) < 1e-6);
  CHECK(ep.per_band[0] > 0.99);
}

TEST_CASE("windowed coefficient mass agrees with a refined quadrature") {
  const auto& s = cosine_setup();
  const WaveField psi = bloch_packet(s.table, 0, s.skeleton, v1(2.0), v1(kPi / 4));
  const ParsevalReport coarse = parseval_check(psi, s.table, 8, make_phase_space_grid(psi, 64));
  const BandTable fine_table = fix_gauge(solve_bands({1, 128}, s.table.potential, 8, 16));
  const ParsevalReport fine = parseval_check(psi, fine_table, 8, make_phase_space_grid(psi, 128, 0.25));
  CHECK(coarse.ratio() == doctest::Approx(fine.ratio()).epsilon(1e-8));
}

namespace {

double truncation_change(double r_small) {
  const auto& s = cosine_setup();
  const WaveField wide(1, 4096, 8.0, 1.0 / 16);
  const WaveField psi = bloch_packet(s.table, 0, wide, v1(4.0), v1(kPi / 4));
  const PhaseSpaceGrid small = make_phase_space_grid(psi, 64, 0.5, r_small);
  PhaseSpaceGrid large = small;
  large.r_c = 12.0;
  const auto ws = windowed_bloch_transform(psi, s.table, 0, small);
  const auto wl = windowed_bloch_transform(psi, s.table, 0, large);
  double worst = 0.0;
  for (std::size_t i = 0; i < ws.values.size(); ++i) worst = std::max(worst, std::abs(ws.values[i] - wl.values[i]));
  return worst / wl.max_abs();
}

}  // namespace

TEST_CASE("default Gaussian truncation radius 8 agrees with radius 12") { CHECK(truncation_change(8.0) <= 1e-10); }

TEST_CASE("Gaussian truncation radius 6 versus 12 within 1e-10" * doctest::should_fail()) {
  // The window tail beyond 6 standard deviations is exp(-18) ~ 1.5e-8 of its peak.
  CHECK(truncation_change(6.0) <= 1e-10);
}

TEST_CASE("free-lattice coefficients translate with the field") {
  const auto& s = free_setup();
  const double eps = s.skeleton.eps;
  WaveField a = s.skeleton, b = s.skeleton;
  const PhaseSpaceGrid probe = make_phase_space_grid(a, 64);
  const double dq = probe.dq;  // a multiple of dx
  // p0 L / eps is a multiple of 2 pi, so the packets are periodic on the torus.
  const double p0 = kTwoPi * 7 / 64;
  fill(a, [&](const Vec& x) { return periodic_gaussian(1.5, p0, eps, 4.0, x); });
  fill(b, [&](const Vec& x) { return periodic_gaussian(1.5 + 3 * dq, p0, eps, 4.0, x); });
  PhaseSpaceGrid g = probe;
  g.q_first = {0, 0};
  g.q_count = {static_cast<int>(std::lround(4.0 / dq)), 0};
  const auto wa = windowed_bloch_transform(a, s.table, 0, g);
  const auto wb = windowed_bloch_transform(b, s.table, 0, g);
  double worst = 0.0;
  const std::size_t nq = g.q_size();
  for (std::size_t iq = 0; iq < nq; ++iq)
    for (std::size_t ip = 0; ip < g.p_size(); ++ip)
      worst = std::max(worst, std::abs(std::abs(wb.at((iq + 3) % nq, ip)) - std::abs(wa.at(iq, ip))));
  CHECK(worst < 1e-10 * wa.max_abs());
}

TEST_CASE("thresholding keeps the large coefficients") {
  const auto& s = cosine_setup();
  const WaveField psi = bloch_packet(s.table, 0, s.skeleton, v1(2.0), v1(kPi / 4));
  const PhaseSpaceGrid g = make_phase_space_grid(psi, 64);
  const auto w = windowed_bloch_transform(psi, s.table, 0, g);
  const auto seeds = threshold_seeds(w);
  CHECK(seeds.size() < g.size());
  CHECK(!seeds.empty());
  const auto t = thresholded(w);
  std::size_t nonzero = 0;
  for (const cplx& z : t.values) nonzero += z != cplx{};
  CHECK(nonzero == seeds.size());
  const WaveField full = windowed_adjoint(w, s.table, s.skeleton);
  const WaveField cut = windowed_adjoint(t, s.table, s.skeleton);
  CHECK(l2_distance(cut, full).relative < 1e-6);
}

TEST_CASE("wave field binary round trip and L2 distances") {
  WaveField w(1, 64, 2.0, 0.25, 0.75);
  for (std::size_t i = 0; i < w.size(); ++i) w.data[i] = {std::sin(0.1 * i), std::cos(0.37 * i)};
  std::stringstream buf;
  write_wavefield(buf, w);
  CHECK(buf.str().size() == 6 + 8 + 24 + 16 * 64);
  const WaveField r = read_wavefield(buf);
  CHECK(r.same_grid(w));
  CHECK(r.time == w.time);
  CHECK(r.data == w.data);
  CHECK(l2_distance(w, w).absolute == 0.0);

  WaveField zero(1, 64, 2.0, 0.25, 0.75);
  CHECK(l2_distance(w, zero).absolute == doctest::Approx(w.norm()));
  // Orthogonal unit-norm plane waves.
  WaveField a(1, 64, 2.0, 0.25), b(1, 64, 2.0, 0.25);
  fill(a, [](const Vec& x) { return std::polar(1.0 / std::sqrt(2.0), kTwoPi * x[0]); });
  fill(b, [](const Vec& x) { return std::polar(1.0 / std::sqrt(2.0), 2 * kTwoPi * x[0]); });
  CHECK(l2_distance(a, b).absolute == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  std::stringstream bad("FGAWF2");
  CHECK_THROWS_AS(read_wavefield(bad), Error);
  CHECK_THROWS_AS(WaveField(1, 64, 1.0, 0.3), Error);
}
