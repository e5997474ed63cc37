#include "fga/synthesis.hpp"

#include "fga/errors.hpp"
#include "fga/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fga {

namespace {

long floor_div(double x, double h) { return static_cast<long>(std::floor(x / h)); }
std::size_t pmod(long i, long n) { return static_cast<std::size_t>(((i % n) + n) % n); }

void check_plan(const SynthesisPlan& plan) {
  if (plan.table == nullptr) fail(ErrorKind::kInvalidPlan, "synthesis plan has no band table");
  const WaveField& s = plan.skeleton;
  if (s.dim != plan.grid.dim || plan.table->grid.dim != s.dim) fail(ErrorKind::kInvalidPlan, "dimension mismatch");
  if (std::abs(s.eps - plan.grid.eps) > 1e-14 * s.eps) fail(ErrorKind::kInvalidPlan, "grid eps differs from field eps");
  if (plan.band < 0 || plan.band >= plan.table->n_bands) fail(ErrorKind::kInvalidPlan, "band not in table");
  s.validate();
  if (s.points_per_cell() < 8) fail(ErrorKind::kResolution, "x grid resolves fewer than 8 points per eps period");
  for (const TrajectoryState& t : plan.trajectories) {
    if (std::abs(t.t - plan.trajectories.front().t) > 1e-12) {
      fail(ErrorKind::kInvalidPlan, "trajectories are at different times");
    }
  }
}

}  // namespace

WaveField synthesize(const SynthesisPlan& plan, int threads, SynthesisStats* stats) {
  check_plan(plan);
  const WaveField& sk = plan.skeleton;
  const int d = sk.dim;
  const double eps = sk.eps;
  const double t = plan.trajectories.empty() ? sk.time : plan.trajectories.front().t;
  WaveField out(d, sk.points, sk.length, eps, t);
  const double dx = sk.spacing();
  const int per_cell = sk.points_per_cell();
  const double radius = plan.grid.radius();
  const double r2 = radius * radius;
  const double scale = std::pow(kTwoPi * eps, -0.75 * d) * std::pow(2.0, -0.25 * d) * plan.grid.weight();
  const PlaneWaveBasis basis = plan.table->basis();
  const std::size_t total = out.data.size();

  // Contiguous trajectory blocks, each with its own partial field, merged in block order.
  constexpr std::size_t kBlocks = 16;
  const std::size_t n = plan.trajectories.size();
  const std::size_t per_block = (n + kBlocks - 1) / kBlocks;
  std::vector<std::vector<cplx>> partial(kBlocks);
  std::vector<SynthesisStats> block_stats(kBlocks);

  parallel_for(kBlocks, threads, [&](std::size_t b) {
    const std::size_t first = b * per_block, last = std::min(n, first + per_block);
    if (first >= last) return;
    std::vector<cplx>& acc = partial[b];
    acc.assign(total, cplx{});
    std::vector<cplx> u(d == 1 ? per_cell : per_cell * per_cell);
    for (std::size_t i = first; i < last; ++i) {
      const TrajectoryState& s = plan.trajectories[i];
      if (s.failed || !std::isfinite(std::abs(s.a0))) {
        ++block_stats[b].skipped;
        continue;
      }
      ++block_stats[b].used;
      const Vec P = s.unwrapped_P();
      const Eigen::VectorXcd c = bloch_coefficients(*plan.table, plan.band, P);
      Vec X(d);
      for (std::size_t m = 0; m < u.size(); ++m) {
        if (d == 1) {
          X[0] = static_cast<double>(m) / per_cell;
        } else {
          X[0] = static_cast<double>(m / per_cell) / per_cell;
          X[1] = static_cast<double>(m % per_cell) / per_cell;
        }
        u[m] = evaluate_plane_waves(c, basis, X);
      }
      const cplx amp = scale * s.a0 * std::polar(1.0, s.S / eps) * s.seed_w;
      std::array<long, 2> lo{0, 0}, hi{0, 0};
      std::array<std::vector<cplx>, 2> g;
      std::array<std::vector<double>, 2> d2;
      for (int a = 0; a < 2; ++a) {
        if (a >= d) {
          g[a].assign(1, cplx{1.0, 0.0});
          d2[a].assign(1, 0.0);
          continue;
        }
        lo[a] = floor_div(s.Q[a] - radius, dx);
        hi[a] = floor_div(s.Q[a] + radius, dx) + 1;
        for (long j = lo[a]; j <= hi[a]; ++j) {
          const double y = j * dx - s.Q[a];
          g[a].push_back(std::exp(-0.5 * y * y / eps) * std::polar(1.0, P[a] * y / eps));
          d2[a].push_back(y * y);
        }
      }
      for (std::size_t j0 = 0; j0 < g[0].size(); ++j0) {
        const long i0 = lo[0] + static_cast<long>(j0);
        for (std::size_t j1 = 0; j1 < g[1].size(); ++j1) {
          if (d2[0][j0] + d2[1][j1] > r2) continue;
          const long i1 = lo[1] + static_cast<long>(j1);
          std::size_t field, cell;
          if (d == 1) {
            field = pmod(i0, sk.points);
            cell = pmod(i0, per_cell);
          } else {
            field = pmod(i0, sk.points) * sk.points + pmod(i1, sk.points);
            cell = pmod(i0, per_cell) * per_cell + pmod(i1, per_cell);
          }
          acc[field] += amp * g[0][j0] * g[1][j1] * u[cell];
        }
      }
    }
  });

  SynthesisStats st;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    st.used += block_stats[b].used;
    st.skipped += block_stats[b].skipped;
    if (partial[b].empty()) continue;
    for (std::size_t k = 0; k < total; ++k) out.data[k] += partial[b][k];
  }
  if (stats != nullptr) *stats = st;
  return out;
}

MultiBandField multi_band_synthesize(const std::vector<SynthesisPlan>& plans, const WaveField& psi0, int threads) {
  MultiBandField r;
  r.field = WaveField(psi0.dim, psi0.points, psi0.length, psi0.eps, psi0.time);
  WaveField projected = r.field;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const SynthesisPlan& p = plans[i];
    if (!p.skeleton.same_grid(psi0)) fail(ErrorKind::kInvalidPlan, "plans use different x grids");
    SynthesisStats s;
    WaveField f = synthesize(p, threads, &s);
    if (i == 0) {
      r.field.time = f.time;
    } else if (std::abs(f.time - r.field.time) > 1e-12) {
      fail(ErrorKind::kInvalidPlan, "plans are at different times");
    }
    r.field += f;
    r.stats.used += s.used;
    r.stats.skipped += s.skipped;
    projected += band_projection(psi0, *p.table, p.band, p.grid, threads);
  }
  projected *= cplx{-1.0, 0.0};
  projected += psi0;
  r.residual = projected.norm();
  return r;
}

}  // namespace fga
