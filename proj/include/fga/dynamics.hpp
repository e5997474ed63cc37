#pragma once

#include "fga/bloch.hpp"
#include "fga/common.hpp"
#include "fga/phase_space.hpp"
#include "fga/potential.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fga {

// h(q, p) = E_n(p) + U(q). Holds a reference to the dispersion model.
class HamiltonianModel {
 public:
  HamiltonianModel(const DispersionModel& dispersion, ExternalPotential potential);

  int dim() const { return dispersion_->dim(); }
  const DispersionModel& dispersion() const { return *dispersion_; }
  const ExternalPotential& potential() const { return potential_; }
  double h(const Vec& q, const Vec& p) const;

 private:
  const DispersionModel* dispersion_;
  ExternalPotential potential_;
};

struct FlowDerivative {
  Vec dQ;
  Vec dP;
};

// dQ/dt = grad E(P), dP/dt = -grad U(Q).
FlowDerivative flow_rhs(const Vec& Q, const Vec& P, const HamiltonianModel& model);
// P.grad E(P) - h(Q, P)
double action_rhs(const Vec& Q, const Vec& P, const HamiltonianModel& model);
// [[0, hess E(P)], [-hess U(Q), 0]] F; F rows are (Q, P), columns (q, p).
PhaseMat jacobian_rhs(const PhaseMat& F, const Vec& Q, const Vec& P, const HamiltonianModel& model);

struct ZParts {
  CMat zQ;  // A - iB
  CMat zP;  // C - iD
  CMat Z;   // zQ + i zP = A + D + i(C - B)
};
ZParts z_parts(const PhaseMat& F);
// Throws kInvariantViolation when sigma_min(Z) < 1.
CMat z_matrix(const PhaseMat& F);
double sigma_min(const CMat& m);
// max |F^T J F - J|
double symplectic_residual(const PhaseMat& F);

// da0/dt = a0 * a0_coefficient:
//   1/2 tr(Z^-1 hess E zP) - i A(P).grad U(Q) - i/2 tr(Z^-1 hess U zQ).
cplx a0_coefficient(const Vec& Q, const Vec& P, const PhaseMat& F, const HamiltonianModel& model);
cplx a0_rhs(cplx a0, const Vec& Q, const Vec& P, const PhaseMat& F, const HamiltonianModel& model);

// Flow values at the 13 offsets (a, b) * delta in (q, p), |a| + |b| <= 2, d = 1.
struct StencilPoint {
  int a = 0;
  int b = 0;
  Vec Q;
  Vec P;
  PhaseMat F;
};
const std::vector<std::pair<int, int>>& a1_stencil();
// Source term of the a1 equation divided by a0 (the part not proportional to a1).
cplx a1_source(const std::vector<StencilPoint>& points, double delta, const HamiltonianModel& model);
cplx a1_rhs(cplx a0, cplx a1, const std::vector<StencilPoint>& points, double delta, const HamiltonianModel& model);

struct TrajectoryState {
  double t = 0.0;
  Vec Q;
  Vec P;  // wrapped into [-pi, pi)
  IVec winding{0, 0};
  double S = 0.0;
  PhaseMat F;
  cplx a0;
  cplx a1;
  std::size_t seed_index = 0;
  Vec seed_q;
  Vec seed_p;
  cplx seed_w;
  double sympl_residual = 0.0;
  double sigma_min_z = 0.0;
  bool failed = false;
  std::string failure;

  Vec unwrapped_P() const;
};

TrajectoryState initial_state(const Seed& seed, std::size_t index);

struct IntegratorOptions {
  double dt = 1e-3;
  bool track_a1 = true;  // d = 1 only
  double a1_delta = 0.0;  // 0: sqrt(eps) / 8
  double eps = 1.0;
  double sympl_tolerance = 1e-6;
  double sigma_floor = 1.0;
  bool check_step = true;  // dt * max(|hess E|, |hess U|) <= 0.1
  int threads = 1;
};

struct EnsembleResult {
  std::vector<double> times;
  std::vector<std::vector<TrajectoryState>> states;  // [checkpoint][seed]
  std::size_t failures = 0;
  double max_sympl_residual = 0.0;
  double min_sigma_z = 0.0;
  double max_energy_drift = 0.0;
};

// RK4 on (Q, P, S, F, a0, a1) per seed, stopping at each checkpoint time.
// Breaches of the invariant monitors mark the trajectory failed and freeze it.
EnsembleResult integrate_ensemble(const std::vector<Seed>& seeds, const HamiltonianModel& model,
                                  const std::vector<double>& checkpoints, const IntegratorOptions& options);

// seed q..., seed p..., t, Q..., P..., S, Re a0, Im a0, Re a1, Im a1, sympl_residual, sigma_min_Z
void write_checkpoint_csv(std::ostream& out, const std::vector<TrajectoryState>& states);

}  // namespace fga
