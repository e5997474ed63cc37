#pragma once

#include "fga/bloch.hpp"
#include "fga/dynamics.hpp"
#include "fga/phase_space.hpp"
#include "fga/wavefield.hpp"

#include <vector>

namespace fga {

struct SynthesisPlan {
  int band = 0;
  const BandTable* table = nullptr;
  PhaseSpaceGrid grid;  // supplies eps, dq, dp and r_c
  std::vector<TrajectoryState> trajectories;
  WaveField skeleton;  // target x grid; samples ignored
};

struct SynthesisStats {
  std::size_t used = 0;
  std::size_t skipped = 0;  // failed trajectories left out of the sum
};

// (2 pi eps)^{-3d/4} 2^{-d/4} sum a0 exp(iS/eps) G_{Q,P}(x) u_n(P, x/eps) w dq^d dp^d,
// with P unwrapped and each Gaussian cut at r_c sqrt(eps).
WaveField synthesize(const SynthesisPlan& plan, int threads = 1, SynthesisStats* stats = nullptr);

struct MultiBandField {
  WaveField field;
  double residual = 0.0;  // |psi0 - sum_n Pi_n psi0|
  SynthesisStats stats;
};

// Sum of per-band syntheses. The residual uses each plan's band and grid.
MultiBandField multi_band_synthesize(const std::vector<SynthesisPlan>& plans, const WaveField& psi0,
                                     int threads = 1);

}  // namespace fga
