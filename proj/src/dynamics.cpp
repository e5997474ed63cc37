#include "fga/dynamics.hpp"

#include "fga/errors.hpp"
#include "fga/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <array>
#include <ostream>

namespace fga {

namespace {

constexpr cplx kI{0.0, 1.0};

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) fail(ErrorKind::kNumeric, std::string("non-finite ") + what);
}

}  // namespace

HamiltonianModel::HamiltonianModel(const DispersionModel& dispersion, ExternalPotential potential)
    : dispersion_(&dispersion), potential_(std::move(potential)) {
  if (potential_.dim() != dispersion.dim()) fail(ErrorKind::kInvalidInput, "U and band dimensions differ");
}

double HamiltonianModel::h(const Vec& q, const Vec& p) const {
  return dispersion_->energy(p) + potential_.value(q);
}

FlowDerivative flow_rhs(const Vec& Q, const Vec& P, const HamiltonianModel& model) {
  require_finite(P, "momentum in dispersion query");
  return {model.dispersion().gradient(P), -model.potential().gradient(Q)};
}

double action_rhs(const Vec& Q, const Vec& P, const HamiltonianModel& model) {
  return P.dot(model.dispersion().gradient(P)) - model.h(Q, P);
}

PhaseMat jacobian_rhs(const PhaseMat& F, const Vec& Q, const Vec& P, const HamiltonianModel& model) {
  const int d = model.dim();
  const Mat he = model.dispersion().hessian(P);
  const Mat hu = model.potential().hessian(Q);
  PhaseMat out(2 * d, 2 * d);
  out.topRows(d) = he * F.bottomRows(d);
  out.bottomRows(d) = -hu * F.topRows(d);
  return out;
}

ZParts z_parts(const PhaseMat& F) {
  const int d = static_cast<int>(F.rows() / 2);
  const Mat A = F.topLeftCorner(d, d), B = F.topRightCorner(d, d);
  const Mat C = F.bottomLeftCorner(d, d), D = F.bottomRightCorner(d, d);
  ZParts z;
  z.zQ = A.cast<cplx>() - kI * B.cast<cplx>();
  z.zP = C.cast<cplx>() - kI * D.cast<cplx>();
  z.Z = z.zQ + kI * z.zP;
  return z;
}

double sigma_min(const CMat& m) {
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues().minCoeff();
}

CMat z_matrix(const PhaseMat& F) {
  const CMat z = z_parts(F).Z;
  const double s = sigma_min(z);
  if (!(s >= 1.0)) {
    fail(ErrorKind::kInvariantViolation, "sigma_min(Z) = " + format_double(s) + " below 1 (theory: >= sqrt 2)");
  }
  return z;
}

double symplectic_residual(const PhaseMat& F) {
  const int d = static_cast<int>(F.rows() / 2);
  PhaseMat J = PhaseMat::Zero(2 * d, 2 * d);
  J.topRightCorner(d, d) = Mat::Identity(d, d);
  J.bottomLeftCorner(d, d) = -Mat::Identity(d, d);
  return (F.transpose() * J * F - J).cwiseAbs().maxCoeff();
}

cplx a0_coefficient(const Vec& Q, const Vec& P, const PhaseMat& F, const HamiltonianModel& model) {
  const ZParts z = z_parts(F);
  const CMat zinv = z.Z.inverse();
  const CMat he = model.dispersion().hessian(P).cast<cplx>();
  const CMat hu = model.potential().hessian(Q).cast<cplx>();
  const double berry = model.dispersion().berry(P).dot(model.potential().gradient(Q));
  return 0.5 * (zinv * he * z.zP).trace() - kI * berry - 0.5 * kI * (zinv * hu * z.zQ).trace();
}

cplx a0_rhs(cplx a0, const Vec& Q, const Vec& P, const PhaseMat& F, const HamiltonianModel& model) {
  return a0 * a0_coefficient(Q, P, F, model);
}

const std::vector<std::pair<int, int>>& a1_stencil() {
  static const std::vector<std::pair<int, int>> s{{0, 0},  {1, 0},  {-1, 0}, {0, 1},  {0, -1}, {2, 0},  {-2, 0},
                                                  {0, 2},  {0, -2}, {1, 1},  {1, -1}, {-1, 1}, {-1, -1}};
  return s;
}

cplx a1_source(const std::vector<StencilPoint>& points, double delta, const HamiltonianModel& model) {
  if (model.dim() != 1) fail(ErrorKind::kInvalidInput, "a1 is tracked for d = 1 only");
  // Per-point quantities on a 5x5 patch indexed by (a + 2, b + 2).
  struct Node {
    bool set = false;
    cplx Z, zQ;
    double u2 = 0.0, u3 = 0.0, u4 = 0.0;
  };
  std::array<Node, 25> at{};
  auto slot = [](int a, int b) { return static_cast<std::size_t>((a + 2) * 5 + (b + 2)); };
  const ExternalPotential& U = model.potential();
  for (const StencilPoint& p : points) {
    if (std::abs(p.a) > 2 || std::abs(p.b) > 2) fail(ErrorKind::kInvalidInput, "a1 stencil point out of range");
    Node& n = at[slot(p.a, p.b)];
    const ZParts z = z_parts(p.F);
    n.set = true;
    n.Z = z.Z(0, 0);
    n.zQ = z.zQ(0, 0);
    n.u2 = U.hessian(p.Q)(0, 0);
    n.u3 = U.third(p.Q)[t3(0, 0, 0)];
    n.u4 = U.fourth(p.Q)[t4(0, 0, 0, 0)];
  }
  for (const auto& [a, b] : a1_stencil()) {
    if (!at[slot(a, b)].set) fail(ErrorKind::kInvalidInput, "incomplete a1 stencil");
  }
  auto N = [&](int a, int b) -> const Node& { return at[slot(a, b)]; };
  // d/dz = d/dq - i d/dp by centered differences around (a, b).
  auto D = [&](auto&& f, int a, int b) {
    return (f(a + 1, b) - f(a - 1, b)) / (2.0 * delta) - kI * (f(a, b + 1) - f(a, b - 1)) / (2.0 * delta);
  };
  auto g = [&](int a, int b) -> cplx { return (1.0 - N(a, b).u2) / N(a, b).Z; };
  auto dg_over_z = [&](int a, int b) -> cplx { return D(g, a, b) / N(a, b).Z; };
  auto t2_inner = [&](int a, int b) -> cplx { return N(a, b).zQ * N(a, b).u3 / (N(a, b).Z * N(a, b).Z); };
  auto t3_inner = [&](int a, int b) -> cplx { return N(a, b).u3 / N(a, b).Z; };
  const cplx zc = N(0, 0).Z, qc = N(0, 0).zQ;
  const cplx T1 = D(dg_over_z, 0, 0);
  const cplx T2 = D(t2_inner, 0, 0);
  const cplx T3 = qc * D(t3_inner, 0, 0) / zc;
  const cplx T4 = qc * qc * N(0, 0).u4 / (zc * zc);
  return 0.5 * kI * T1 + kI / 3.0 * T2 + kI / 6.0 * T3 - kI / 8.0 * T4;
}

cplx a1_rhs(cplx a0, cplx a1, const std::vector<StencilPoint>& points, double delta, const HamiltonianModel& model) {
  const StencilPoint* c = nullptr;
  for (const StencilPoint& p : points)
    if (p.a == 0 && p.b == 0) c = &p;
  if (c == nullptr) fail(ErrorKind::kInvalidInput, "a1 stencil lacks its centre");
  return a1 * a0_coefficient(c->Q, c->P, c->F, model) + a0 * a1_source(points, delta, model);
}

Vec TrajectoryState::unwrapped_P() const {
  Vec p = P;
  for (int a = 0; a < P.size(); ++a) p[a] += kTwoPi * winding[a];
  return p;
}

TrajectoryState initial_state(const Seed& seed, std::size_t index) {
  const int d = static_cast<int>(seed.q.size());
  TrajectoryState s;
  s.Q = seed.q;
  s.P = Vec(d);
  for (int a = 0; a < d; ++a) s.P[a] = wrap_to_zone(seed.p[a], &s.winding[a]);
  s.F = PhaseMat::Identity(2 * d, 2 * d);
  s.a0 = std::pow(2.0, 0.5 * d);
  s.a1 = 0.0;
  s.seed_index = index;
  s.seed_q = seed.q;
  s.seed_p = seed.p;
  s.seed_w = seed.w;
  s.sigma_min_z = sigma_min(z_parts(s.F).Z);
  return s;
}

namespace {

// Packed ODE state: centre [Q P S F a0 a1] then auxiliaries [Q P F].
struct Packing {
  int d;
  int n_aux;
  int core() const { return 2 * d + 1 + 4 * d * d + 4; }
  int aux() const { return 2 * d + 4 * d * d; }
  int size() const { return core() + n_aux * aux(); }
};

Eigen::VectorXd pack(const Packing& pk, const TrajectoryState& s, const std::vector<StencilPoint>& aux) {
  const int d = pk.d;
  Eigen::VectorXd y(pk.size());
  int o = 0;
  y.segment(o, d) = s.Q, o += d;
  y.segment(o, d) = s.unwrapped_P(), o += d;
  y[o++] = s.S;
  for (int j = 0; j < 2 * d; ++j)
    for (int i = 0; i < 2 * d; ++i) y[o++] = s.F(i, j);
  y[o++] = s.a0.real();
  y[o++] = s.a0.imag();
  y[o++] = s.a1.real();
  y[o++] = s.a1.imag();
  for (const StencilPoint& p : aux) {
    y.segment(o, d) = p.Q, o += d;
    y.segment(o, d) = p.P, o += d;
    for (int j = 0; j < 2 * d; ++j)
      for (int i = 0; i < 2 * d; ++i) y[o++] = p.F(i, j);
  }
  return y;
}

PhaseMat read_f(const Eigen::VectorXd& y, int& o, int d) {
  PhaseMat F(2 * d, 2 * d);
  for (int j = 0; j < 2 * d; ++j)
    for (int i = 0; i < 2 * d; ++i) F(i, j) = y[o++];
  return F;
}

void write_f(Eigen::VectorXd& y, int& o, const PhaseMat& F) {
  for (int j = 0; j < F.cols(); ++j)
    for (int i = 0; i < F.rows(); ++i) y[o++] = F(i, j);
}

struct Unpacked {
  Vec Q, P;
  double S;
  PhaseMat F;
  cplx a0, a1;
  std::vector<StencilPoint> stencil;  // centre first, empty without a1
};

Unpacked unpack(const Packing& pk, const Eigen::VectorXd& y) {
  const int d = pk.d;
  Unpacked u;
  int o = 0;
  u.Q = y.segment(o, d), o += d;
  u.P = y.segment(o, d), o += d;
  u.S = y[o++];
  u.F = read_f(y, o, d);
  u.a0 = {y[o], y[o + 1]}, o += 2;
  u.a1 = {y[o], y[o + 1]}, o += 2;
  if (pk.n_aux > 0) {
    const auto& st = a1_stencil();
    u.stencil.push_back({0, 0, u.Q, u.P, u.F});
    for (int k = 0; k < pk.n_aux; ++k) {
      StencilPoint p;
      p.a = st[k + 1].first;
      p.b = st[k + 1].second;
      p.Q = y.segment(o, d), o += d;
      p.P = y.segment(o, d), o += d;
      p.F = read_f(y, o, d);
      u.stencil.push_back(p);
    }
  }
  return u;
}

Eigen::VectorXd rhs(const Packing& pk, const Eigen::VectorXd& y, const HamiltonianModel& model, double delta) {
  const int d = pk.d;
  const Unpacked u = unpack(pk, y);
  Eigen::VectorXd dy(y.size());
  int o = 0;
  const FlowDerivative f = flow_rhs(u.Q, u.P, model);
  dy.segment(o, d) = f.dQ, o += d;
  dy.segment(o, d) = f.dP, o += d;
  dy[o++] = action_rhs(u.Q, u.P, model);
  write_f(dy, o, jacobian_rhs(u.F, u.Q, u.P, model));
  const cplx coef = a0_coefficient(u.Q, u.P, u.F, model);
  const cplx da0 = u.a0 * coef;
  const cplx da1 = pk.n_aux > 0 ? u.a1 * coef + u.a0 * a1_source(u.stencil, delta, model) : cplx{};
  dy[o++] = da0.real();
  dy[o++] = da0.imag();
  dy[o++] = da1.real();
  dy[o++] = da1.imag();
  for (int k = 0; k < pk.n_aux; ++k) {
    const StencilPoint& p = u.stencil[k + 1];
    const FlowDerivative fa = flow_rhs(p.Q, p.P, model);
    dy.segment(o, d) = fa.dQ, o += d;
    dy.segment(o, d) = fa.dP, o += d;
    write_f(dy, o, jacobian_rhs(p.F, p.Q, p.P, model));
  }
  return dy;
}

void store(const Packing& pk, const Eigen::VectorXd& y, double t, TrajectoryState& s) {
  const Unpacked u = unpack(pk, y);
  s.t = t;
  s.Q = u.Q;
  for (int a = 0; a < pk.d; ++a) s.P[a] = wrap_to_zone(u.P[a], &s.winding[a]);
  s.S = u.S;
  s.F = u.F;
  s.a0 = u.a0;
  s.a1 = u.a1;
}

}  // namespace

EnsembleResult integrate_ensemble(const std::vector<Seed>& seeds, const HamiltonianModel& model,
                                  const std::vector<double>& checkpoints, const IntegratorOptions& options) {
  const int d = model.dim();
  if (!(options.dt > 0.0)) fail(ErrorKind::kInvalidInput, "time step must be positive");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] < 0.0 || (i > 0 && checkpoints[i] < checkpoints[i - 1])) {
      fail(ErrorKind::kInvalidInput, "checkpoint times must be non-negative and ascending");
    }
  }
  if (options.check_step) {
    double stiff = model.dispersion().max_hessian();
    const double u2 = model.potential().derivative_bounds()[0];
    if (std::isfinite(u2)) stiff = std::max(stiff, u2);
    if (options.dt * stiff > 0.1) {
      fail(ErrorKind::kInvalidInput, "dt * max(|hess E|, |hess U|) = " + format_double(options.dt * stiff) +
                                         " exceeds 0.1; reduce dt");
    }
  }
  const bool a1 = options.track_a1 && d == 1;
  const double delta = options.a1_delta > 0.0 ? options.a1_delta : std::sqrt(options.eps) / 8.0;
  const Packing pk{d, a1 ? static_cast<int>(a1_stencil().size()) - 1 : 0};

  EnsembleResult result;
  result.times = checkpoints;
  result.states.assign(checkpoints.size(), std::vector<TrajectoryState>(seeds.size()));
  std::vector<double> drift(seeds.size(), 0.0);

  parallel_for(seeds.size(), options.threads, [&](std::size_t i) {
    TrajectoryState s = initial_state(seeds[i], i);
    std::vector<StencilPoint> aux;
    if (a1) {
      const auto& st = a1_stencil();
      for (std::size_t k = 1; k < st.size(); ++k) {
        StencilPoint p;
        p.a = st[k].first;
        p.b = st[k].second;
        p.Q = seeds[i].q;
        p.Q[0] += p.a * delta;
        p.P = seeds[i].p;
        p.P[0] += p.b * delta;
        p.F = PhaseMat::Identity(2, 2);
        aux.push_back(p);
      }
    }
    Eigen::VectorXd y = pack(pk, s, aux);
    const double h0 = model.h(s.Q, s.unwrapped_P());
    double t = 0.0;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      const double target = checkpoints[c];
      const long steps = static_cast<long>(std::ceil((target - t) / options.dt - 1e-9));
      const double h = steps > 0 ? (target - t) / steps : 0.0;
      for (long n = 0; n < steps && !s.failed; ++n) {
        const Eigen::VectorXd k1 = rhs(pk, y, model, delta);
        const Eigen::VectorXd k2 = rhs(pk, y + 0.5 * h * k1, model, delta);
        const Eigen::VectorXd k3 = rhs(pk, y + 0.5 * h * k2, model, delta);
        const Eigen::VectorXd k4 = rhs(pk, y + h * k3, model, delta);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        store(pk, y, t, s);
        if (!y.allFinite()) {
          s.failed = true;
          s.failure = "non-finite state at t=" + format_double(t);
          break;
        }
        s.sympl_residual = std::max(s.sympl_residual, symplectic_residual(s.F));
        s.sigma_min_z = std::min(s.sigma_min_z, sigma_min(z_parts(s.F).Z));
        drift[i] = std::max(drift[i], std::abs(model.h(s.Q, s.unwrapped_P()) - h0));
        if (s.sympl_residual > options.sympl_tolerance) {
          s.failed = true;
          s.failure = "symplecticity residual " + format_double(s.sympl_residual) + " at t=" + format_double(t);
        } else if (s.sigma_min_z < options.sigma_floor) {
          s.failed = true;
          s.failure = "sigma_min(Z) " + format_double(s.sigma_min_z) + " at t=" + format_double(t);
        }
      }
      if (!s.failed) t = target;
      result.states[c][i] = s;
    }
  });

  result.min_sigma_z = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (checkpoints.empty()) break;
    const TrajectoryState& last = result.states.back()[i];
    result.failures += last.failed ? 1 : 0;
    result.max_sympl_residual = std::max(result.max_sympl_residual, last.sympl_residual);
    result.min_sigma_z = std::min(result.min_sigma_z, last.sigma_min_z);
    result.max_energy_drift = std::max(result.max_energy_drift, drift[i]);
  }
  if (seeds.empty()) result.min_sigma_z = 0.0;
  return result;
}

void write_checkpoint_csv(std::ostream& out, const std::vector<TrajectoryState>& states) {
  const int d = states.empty() ? 1 : static_cast<int>(states.front().Q.size());
  for (int a = 1; a <= d; ++a) out << "seed_q_" << a << ',';
  for (int a = 1; a <= d; ++a) out << "seed_p_" << a << ',';
  out << 't';
  for (int a = 1; a <= d; ++a) out << ",Q_" << a;
  for (int a = 1; a <= d; ++a) out << ",P_" << a;
  out << ",S,re_a0,im_a0,re_a1,im_a1,sympl_residual,sigma_min_Z\n";
  for (const TrajectoryState& s : states) {
    for (int a = 0; a < d; ++a) out << format_double(s.seed_q[a]) << ',';
    for (int a = 0; a < d; ++a) out << format_double(s.seed_p[a]) << ',';
    out << format_double(s.t);
    for (int a = 0; a < d; ++a) out << ',' << format_double(s.Q[a]);
    for (int a = 0; a < d; ++a) out << ',' << format_double(s.P[a]);
    out << ',' << format_double(s.S) << ',' << format_double(s.a0.real()) << ',' << format_double(s.a0.imag()) << ','
        << format_double(s.a1.real()) << ',' << format_double(s.a1.imag()) << ',' << format_double(s.sympl_residual)
        << ',' << format_double(s.sigma_min_z) << '\n';
  }
}

}  // namespace fga
