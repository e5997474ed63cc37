#include "fga/pipeline.hpp"

#include "fga/errors.hpp"

#include <algorithm>
#include <limits>

namespace fga {

std::unique_ptr<BandSetup> prepare_bands(const PeriodicPotential& v, int nodes_per_axis, int cutoff, int n_bands,
                                         int threads) {
  auto s = std::make_unique<BandSetup>();
  s->table = fix_gauge(solve_bands({v.dim(), nodes_per_axis}, v, n_bands, cutoff, threads));
  s->grad = grad_E(s->table, 1e-3, threads);
  s->hessian = hessian_E(s->table, s->grad);
  s->berry = berry_connection(s->table, 1e-4, threads);
  for (int n = 0; n < n_bands; ++n) {
    s->models.push_back(std::make_unique<DispersionModel>(s->table, n, s->grad, s->hessian, s->berry));
  }
  return s;
}

FgaRun run_fga(const WaveField& psi0, const BandSetup& setup, const std::vector<int>& bands,
               const ExternalPotential& u, const std::vector<double>& times, const FgaOptions& options,
               int threads) {
  if (u.dim() != psi0.dim) fail(ErrorKind::kInvalidInput, "U and wave field dimensions differ");
  FgaRun run;
  run.times = times;
  run.projected = WaveField(psi0.dim, psi0.points, psi0.length, psi0.eps, psi0.time);
  run.projected_seeds = run.projected;
  run.min_sigma_z = std::numeric_limits<double>::infinity();
  for (double t : times) run.fields.emplace_back(psi0.dim, psi0.points, psi0.length, psi0.eps, t);

  const PhaseSpaceGrid grid =
      make_phase_space_grid(psi0, setup.table.grid.nodes_per_axis, options.c_g, options.r_c);
  IntegratorOptions io = options.integrator;
  io.eps = psi0.eps;
  io.threads = threads;

  for (int band : bands) {
    require_isolated(setup.table, band, setup.grad, options.isolation);
    WindowedCoefficients w = windowed_bloch_transform(psi0, setup.table, band, grid, threads);
    run.projected += windowed_adjoint(w, setup.table, psi0, threads);
    const WindowedCoefficients kept = thresholded(w, options.seed_threshold);
    run.projected_seeds += windowed_adjoint(kept, setup.table, psi0, threads);
    const std::vector<Seed> seeds = threshold_seeds(w, options.seed_threshold);
    run.seeds += seeds.size();
    run.grid_points += grid.size();

    const HamiltonianModel model(setup.model(band), u);
    EnsembleResult ens = integrate_ensemble(seeds, model, times, io);
    for (std::size_t c = 0; c < times.size(); ++c) {
      SynthesisPlan plan{band, &setup.table, grid, ens.states[c], psi0};
      SynthesisStats st;
      WaveField f = synthesize(plan, threads, &st);
      f.time = times[c];
      run.fields[c] += f;
      if (c + 1 == times.size()) {
        run.synthesis.used += st.used;
        run.synthesis.skipped += st.skipped;
      }
    }
    run.max_sympl_residual = std::max(run.max_sympl_residual, ens.max_sympl_residual);
    if (!seeds.empty()) run.min_sigma_z = std::min(run.min_sigma_z, ens.min_sigma_z);
    run.coefficients.push_back(std::move(w));
    run.ensembles.push_back(std::move(ens));
  }
  WaveField residual = run.projected;
  residual *= cplx{-1.0, 0.0};
  residual += psi0;
  run.projection_residual = residual.norm();
  for (std::size_t c = 0; c < times.size(); ++c) {
    if (times[c] == 0.0) run.t0_consistency = l2_distance(run.fields[c], run.projected_seeds).absolute;
  }
  return run;
}

}  // namespace fga
