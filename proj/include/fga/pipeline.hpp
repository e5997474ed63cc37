#pragma once

#include "fga/bloch.hpp"
#include "fga/dynamics.hpp"
#include "fga/phase_space.hpp"
#include "fga/synthesis.hpp"
#include "fga/wavefield.hpp"

#include <memory>
#include <vector>

namespace fga {

// Everything derived from V on the Brillouin grid. Models exist for every band;
// run_fga checks isolation before using one.
struct BandSetup {
  BandTable table;
  GradSamples grad;
  std::vector<std::vector<Mat>> hessian;
  BerrySamples berry;
  std::vector<std::unique_ptr<DispersionModel>> models;

  const DispersionModel& model(int band) const { return *models.at(band); }
};

std::unique_ptr<BandSetup> prepare_bands(const PeriodicPotential& v, int nodes_per_axis, int cutoff, int n_bands,
                                         int threads = 1);

struct FgaOptions {
  double c_g = 0.5;
  double r_c = 8.0;
  double seed_threshold = 1e-8;  // relative to max |w|
  IntegratorOptions integrator;  // eps is taken from psi0
  IsolationPolicy isolation;
};

struct FgaRun {
  std::vector<double> times;
  std::vector<WaveField> fields;               // per checkpoint, summed over bands
  std::vector<WindowedCoefficients> coefficients;  // per band, unthresholded
  std::vector<EnsembleResult> ensembles;           // per band
  WaveField projected;                             // sum of Pi_n psi0
  WaveField projected_seeds;                       // adjoint of the thresholded coefficients
  double projection_residual = 0.0;                // |psi0 - sum Pi_n psi0|
  double t0_consistency = -1.0;                    // |psi_FGA(0) - projected_seeds|, -1 without t = 0
  std::size_t seeds = 0;
  std::size_t grid_points = 0;
  SynthesisStats synthesis;
  double max_sympl_residual = 0.0;
  double min_sigma_z = 0.0;
};

// Decompose psi0 on the given (0-based) bands, integrate the thresholded seeds
// to every checkpoint and synthesize.
FgaRun run_fga(const WaveField& psi0, const BandSetup& setup, const std::vector<int>& bands,
               const ExternalPotential& u, const std::vector<double>& times, const FgaOptions& options,
               int threads = 1);

}  // namespace fga
