#include "fga/errors.hpp"
#include "fga/harness.hpp"
#include "fga/reference.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace fga {

namespace fs = std::filesystem;

namespace {

constexpr cplx kI{0.0, 1.0};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// Re-throws with the pipeline stage prefixed.
template <class Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::string what = e.what();
    const std::string prefix = std::string(to_string(e.kind())) + ": ";
    if (what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
    throw Error(e.kind(), std::string("[") + name + "] " + what);
  }
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) fail(ErrorKind::kResource, "cannot write " + p.string());
  return out;
}

std::size_t field_points(const RunConfig& cfg, double eps) {
  const long per_axis = std::lround(cfg.length / eps) * cfg.points_per_cell;
  return cfg.dim == 1 ? static_cast<std::size_t>(per_axis) : static_cast<std::size_t>(per_axis * per_axis);
}

void check_memory(const RunConfig& cfg, double eps, int fields, const char* what) {
  const double mb = static_cast<double>(field_points(cfg, eps)) * sizeof(cplx) * fields / (1024.0 * 1024.0);
  if (mb > cfg.memory_limit_mb) {
    std::ostringstream os;
    os << what << " at eps=" << format_double(eps) << " needs about " << std::ceil(mb)
       << " MB, above tolerances.memory_limit_mb=" << cfg.memory_limit_mb
       << "; reduce numerics.length or numerics.points_per_cell, or raise the limit";
    fail(ErrorKind::kResource, os.str());
  }
}

// Per-axis frequency and centre when U is a separable harmonic well (omega = 0 for U = 0).
bool harmonic_axes(const ExternalPotential& u, int dim, std::array<double, 2>& omega, std::array<double, 2>& center) {
  omega = {0.0, 0.0};
  center = {0.0, 0.0};
  if (!u.cos_terms().empty()) return false;
  std::array<bool, 2> seen{false, false};
  for (const auto& t : u.poly_terms()) {
    if (t.coeff[0] != 0.0 || t.coeff[1] != 0.0 || t.coeff[3] != 0.0 || t.coeff[4] != 0.0) return false;
    if (t.coeff[2] < 0.0 || seen[t.axis]) return false;
    seen[t.axis] = true;
    omega[t.axis] = std::sqrt(t.coeff[2]);
    center[t.axis] = t.center;
  }
  (void)dim;
  return true;
}

WaveField reference_run(const RunConfig& cfg, const WaveField& psi0, ReferenceStats* stats) {
  if (cfg.dim != 1) fail(ErrorKind::kConfig, "the reference solver is one-dimensional");
  check_memory(cfg, psi0.eps, 6, "reference solver");
  ReferenceConfig rc;
  rc.eps = psi0.eps;
  rc.length = cfg.length;
  rc.points = psi0.points;
  rc.dt = psi0.eps / (20.0 * cfg.reference_dt_divisor);
  rc.v = cfg.lattice_potential();
  rc.u = cfg.external_potential();
  rc.T = cfg.T;
  return reference_propagate(psi0, rc, stats);
}

}  // namespace

WaveField initial_field(const RunConfig& cfg, double eps, const BandTable& table) {
  const int points = static_cast<int>(std::lround(cfg.length / eps)) * cfg.points_per_cell;
  const WaveField skeleton(cfg.dim, points, cfg.length, eps);
  if (cfg.initial_type == "file") {
    WaveField w = load_wavefield(cfg.initial_file);
    if (w.dim != cfg.dim || std::abs(w.eps - eps) > 1e-14 * eps || std::abs(w.length - cfg.length) > 1e-12) {
      fail(ErrorKind::kConfig, "initial.file does not match dim, eps or length of the configuration");
    }
    return w;
  }
  Vec q0(cfg.dim), p0(cfg.dim);
  for (int a = 0; a < cfg.dim; ++a) {
    q0[a] = cfg.q0[a];
    p0[a] = cfg.p0[a];
  }
  return bloch_packet(table, cfg.packet_band - 1, skeleton, q0, p0, cfg.width);
}

bool analytic_available(const RunConfig& cfg) {
  if (cfg.initial_type != "gaussian-packet" || cfg.packet_band != 1) return false;
  if (cfg.lattice_potential().coefficients().size() > 0) {
    for (const auto& [k, c] : cfg.lattice_potential().coefficients())
      if (c != cplx{}) return false;
  }
  for (double p : cfg.p0)
    if (std::abs(p) >= kPi) return false;
  std::array<double, 2> omega, center;
  return harmonic_axes(cfg.external_potential(), cfg.dim, omega, center);
}

WaveField analytic_solution(const RunConfig& cfg, double eps, double t) {
  if (!analytic_available(cfg)) fail(ErrorKind::kConfig, "no closed form for this configuration");
  std::array<double, 2> omega, center;
  harmonic_axes(cfg.external_potential(), cfg.dim, omega, center);
  const int points = static_cast<int>(std::lround(cfg.length / eps)) * cfg.points_per_cell;
  WaveField w(cfg.dim, points, cfg.length, eps, t);
  // Gaussian exp(i/eps [alpha y^2 / 2 + p y + S]) / sqrt(c) per axis, y = x - q(t).
  struct Axis {
    cplx alpha, c, root;
    double q, p, S;
  };
  std::array<Axis, 2> ax{};
  for (int a = 0; a < cfg.dim; ++a) {
    const cplx a0 = kI / (cfg.width * cfg.width);
    const double q0 = cfg.q0[a] - center[a], p0 = cfg.p0[a], om = omega[a];
    Axis& s = ax[a];
    if (om == 0.0) {
      s.c = 1.0 + a0 * t;
      s.alpha = a0 / s.c;
      s.q = q0 + p0 * t;
      s.p = p0;
      s.S = 0.5 * p0 * p0 * t;
    } else {
      const double co = std::cos(om * t), si = std::sin(om * t);
      s.c = co + a0 * si / om;
      s.alpha = (a0 * co - om * si) / s.c;
      s.q = q0 * co + p0 / om * si;
      s.p = p0 * co - om * q0 * si;
      s.S = 0.5 * (s.p * s.q - p0 * q0);
    }
    s.q += center[a];
    // Branch-continuous sqrt(c): arg c follows omega t around the origin.
    double arg = std::arg(s.c);
    if (om != 0.0) arg += kTwoPi * std::round((om * t - arg) / kTwoPi);
    s.root = std::polar(std::sqrt(std::abs(s.c)), 0.5 * arg);
  }
  fill(w, [&](const Vec& x) {
    cplx v{1.0, 0.0};
    for (int a = 0; a < cfg.dim; ++a) {
      const Axis& s = ax[a];
      const double y = x[a] - s.q - cfg.length * std::round((x[a] - s.q) / cfg.length);
      v *= std::exp(kI / eps * (0.5 * s.alpha * y * y + s.p * y + s.S)) / s.root;
    }
    return v;
  });
  w *= std::pow(kPi * cfg.width * cfg.width * eps, -0.25 * cfg.dim);
  return w;
}


int cmd_bands(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log) {
  Stopwatch sw;
  const auto setup = stage("bands", [&] {
    return prepare_bands(cfg.lattice_potential(), cfg.nodes, cfg.cutoff, cfg.n_bands, threads);
  });
  report.timings["bands"] = sw.lap();
  const BandTable& t = setup->table;
  const fs::path dir = out_dir(cfg);
  {
    std::ofstream out = open_out(dir / "bands.csv");
    write_band_csv(out, t, cfg.band_indices(), setup->grad, setup->berry);
  }
  report.monitors["grad_identity_discrepancy"] = setup->grad.max_discrepancy;
  report.monitors["berry_max_imaginary"] = setup->berry.max_imaginary;
  for (int n : cfg.band_indices()) {
    const std::string tag = "band_" + std::to_string(n + 1);
    report.monitors["min_gap_" + tag] = t.min_gap[n];
    report.monitors["holonomy_" + tag] = t.holonomy[n][0];
    report.notes["gauge_" + tag] = to_string(t.gauge[n]);
    log << "band " << n + 1 << ": min_gap=" << format_double(t.min_gap[n]) << " gauge=" << to_string(t.gauge[n])
        << " holonomy=" << format_double(t.holonomy[n][0])
        << " grad_discrepancy=" << format_double(setup->grad.discrepancy[n]) << '\n';
  }
  for (int n : cfg.band_indices()) {
    stage("bands", [&] {
      require_isolated(t, n, setup->grad, {cfg.gap_factor, setup->grad.fd_step});
      return 0;
    });
  }
  return kExitOk;
}

int cmd_decompose(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log) {
  Stopwatch sw;
  const double eps = cfg.eps.front();
  check_memory(cfg, eps, 4 + cfg.n_bands, "decomposition");
  const auto setup = stage("bands", [&] {
    return prepare_bands(cfg.lattice_potential(), cfg.nodes, cfg.cutoff, cfg.n_bands, threads);
  });
  report.timings["bands"] = sw.lap();
  const WaveField psi0 = stage("initial", [&] { return initial_field(cfg, eps, setup->table); });
  const PhaseSpaceGrid grid = stage("decompose", [&] {
    return make_phase_space_grid(psi0, cfg.nodes, cfg.c_g, cfg.r_c);
  });
  const fs::path dir = out_dir(cfg);
  save_wavefield((dir / "psi0.wf").string(), psi0);
  WaveField sum(psi0.dim, psi0.points, psi0.length, psi0.eps);
  double mass = 0.0;
  for (int n = 0; n < cfg.n_bands; ++n) {
    const WindowedCoefficients w =
        stage("decompose", [&] { return windowed_bloch_transform(psi0, setup->table, n, grid, threads); });
    mass += w.mass();
    sum += windowed_adjoint(w, setup->table, psi0, threads);
    const bool requested = std::find(cfg.bands.begin(), cfg.bands.end(), n + 1) != cfg.bands.end();
    if (!requested) continue;
    const WindowedCoefficients kept = thresholded(w, cfg.seed_threshold);
    std::ofstream out = open_out(dir / ("coefficients_band" + std::to_string(n + 1) + ".csv"));
    write_coefficients_csv(out, kept);
    report.monitors["seeds_band_" + std::to_string(n + 1)] =
        static_cast<double>(threshold_seeds(w, cfg.seed_threshold).size());
  }
  report.timings["decompose"] = sw.lap();
  const double norm = psi0.norm();
  report.monitors["reconstruction_residual"] = l2_distance(sum, psi0).absolute / norm;
  report.monitors["parseval_ratio"] = mass / (norm * norm);
  report.monitors["phase_space_points"] = static_cast<double>(grid.size());
  log << "reconstruction residual over " << cfg.n_bands
      << " bands: " << format_double(report.monitors["reconstruction_residual"])
      << "  parseval ratio: " << format_double(report.monitors["parseval_ratio"]) << '\n';
  return kExitOk;
}

int cmd_propagate(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log) {
  Stopwatch sw;
  const double eps = cfg.eps.front();
  const std::vector<double> times = cfg.checkpoint_times();
  check_memory(cfg, eps, 4 + static_cast<int>(times.size()), "propagation");
  const auto setup = stage("bands", [&] {
    return prepare_bands(cfg.lattice_potential(), cfg.nodes, cfg.cutoff, cfg.n_bands, threads);
  });
  report.timings["bands"] = sw.lap();
  const WaveField psi0 = stage("initial", [&] { return initial_field(cfg, eps, setup->table); });
  const FgaRun run = stage("propagate", [&] {
    return run_fga(psi0, *setup, cfg.band_indices(), cfg.external_potential(), times, cfg.fga_options(), threads);
  });
  report.timings["propagate"] = sw.lap();

  const fs::path dir = out_dir(cfg);
  for (std::size_t c = 0; c < times.size(); ++c) {
    const std::string tag = "t" + std::to_string(c);
    save_wavefield((dir / ("psi_" + tag + ".wf")).string(), run.fields[c]);
    std::ofstream out = open_out(dir / ("density_" + tag + ".csv"));
    write_density_csv(out, run.fields[c]);
  }
  for (std::size_t b = 0; b < run.ensembles.size(); ++b) {
    std::ofstream out = open_out(dir / ("trajectories_band" + std::to_string(cfg.bands[b]) + ".csv"));
    write_checkpoint_csv(out, run.ensembles[b].states.back());
  }
  const double norm = psi0.norm();
  report.monitors["seeds"] = static_cast<double>(run.seeds);
  report.monitors["phase_space_points"] = static_cast<double>(run.grid_points);
  report.monitors["failed_trajectories"] = static_cast<double>(run.synthesis.skipped);
  report.monitors["max_symplecticity_residual"] = run.max_sympl_residual;
  report.monitors["min_sigma_z"] = run.min_sigma_z;
  report.monitors["projection_residual"] = run.projection_residual / norm;
  for (int n : cfg.band_indices()) {
    report.monitors["holonomy_band_" + std::to_string(n + 1)] = setup->table.holonomy[n][0];
  }
  if (run.t0_consistency >= 0.0) report.monitors["t0_consistency"] = run.t0_consistency / norm;
  if (analytic_available(cfg)) {
    const WaveField a0 = analytic_solution(cfg, eps, 0.0);
    cplx overlap{};
    for (std::size_t i = 0; i < a0.data.size(); ++i) overlap += std::conj(a0.data[i]) * psi0.data[i];
    const cplx phase = overlap / std::abs(overlap);
    for (std::size_t c = 0; c < times.size(); ++c) {
      WaveField a = analytic_solution(cfg, eps, times[c]);
      a *= phase;
      report.errors["analytic_t" + std::to_string(c)] = l2_distance(run.fields[c], a).absolute / norm;
    }
  }
  report.timings["output"] = sw.lap();
  log << "seeds " << run.seeds << " of " << run.grid_points << ", failed " << run.synthesis.skipped
      << ", max symplecticity residual " << format_double(run.max_sympl_residual) << ", min sigma(Z) "
      << format_double(run.min_sigma_z) << '\n';
  for (const auto& [k, v] : report.errors) log << k << " relative error " << format_double(v) << '\n';
  if (run.t0_consistency >= 0.0) {
    log << "t=0 consistency " << format_double(run.t0_consistency / norm) << '\n';
    if (run.t0_consistency / norm > cfg.t0_consistency) {
      report.notes["status"] = "t=0 consistency above tolerance";
      return kExitNumeric;
    }
  }
  if (run.synthesis.skipped > 0) {
    report.notes["status"] = std::to_string(run.synthesis.skipped) + " trajectories failed";
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_reference(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log) {
  Stopwatch sw;
  const double eps = cfg.eps.front();
  const auto setup = stage("bands", [&] {
    return prepare_bands(cfg.lattice_potential(), cfg.nodes, cfg.cutoff, cfg.n_bands, threads);
  });
  const WaveField psi0 = stage("initial", [&] { return initial_field(cfg, eps, setup->table); });
  report.timings["bands"] = sw.lap();
  ReferenceStats st;
  const WaveField out = stage("reference", [&] { return reference_run(cfg, psi0, &st); });
  report.timings["reference"] = sw.lap();
  const fs::path dir = out_dir(cfg);
  save_wavefield((dir / "reference.wf").string(), out);
  {
    std::ofstream csv = open_out(dir / "reference_density.csv");
    write_density_csv(csv, out);
  }
  report.monitors["reference_steps"] = static_cast<double>(st.steps);
  report.monitors["reference_norm_drift"] = st.norm_drift;
  if (analytic_available(cfg)) {
    const WaveField a0 = analytic_solution(cfg, eps, 0.0);
    cplx overlap{};
    for (std::size_t i = 0; i < a0.data.size(); ++i) overlap += std::conj(a0.data[i]) * psi0.data[i];
    WaveField a = analytic_solution(cfg, eps, cfg.T);
    a *= overlap / std::abs(overlap);
    report.errors["reference_vs_analytic"] = l2_distance(out, a).absolute / psi0.norm();
  }
  log << "reference: " << st.steps << " steps, norm drift " << format_double(st.norm_drift) << '\n';
  return kExitOk;
}

ConvergenceTable convergence_study(const RunConfig& cfg, int threads, std::ostream* log) {
  if (cfg.eps.size() < 3) fail(ErrorKind::kConfig, "numerics.eps needs at least three values for a convergence study");
  for (std::size_t i = 1; i < cfg.eps.size(); ++i) {
    if (std::abs(cfg.eps[i] - 0.5 * cfg.eps[i - 1]) > 1e-12 * cfg.eps[i]) {
      fail(ErrorKind::kConfig, "numerics.eps must halve from one entry to the next");
    }
  }
  if (cfg.dim != 1) fail(ErrorKind::kConfig, "convergence studies use the one-dimensional reference solver");
  for (double eps : cfg.eps) check_memory(cfg, eps, 8, "convergence run");
  const auto setup = stage("bands", [&] {
    return prepare_bands(cfg.lattice_potential(), cfg.nodes, cfg.cutoff, cfg.n_bands, threads);
  });
  ConvergenceTable table;
  for (double eps : cfg.eps) {
    Stopwatch sw;
    ConvergenceRow row;
    row.eps = eps;
    const WaveField psi0 = stage("initial", [&] { return initial_field(cfg, eps, setup->table); });
    const FgaRun run = stage("propagate", [&] {
      return run_fga(psi0, *setup, cfg.band_indices(), cfg.external_potential(), {cfg.T}, cfg.fga_options(), threads);
    });
    // The FGA evolves sum Pi_n psi0, so the reference starts from the same field.
    const WaveField ref = stage("reference", [&] { return reference_run(cfg, run.projected, nullptr); });
    const double norm = psi0.norm();
    row.error = l2_distance(run.fields.back(), ref).absolute / norm;
    row.projection_residual = run.projection_residual / norm;
    row.floor = row.error < cfg.error_floor;
    row.seconds = sw.lap();
    table.max_sympl_residual = std::max(table.max_sympl_residual, run.max_sympl_residual);
    table.min_sigma_z = table.rows.empty() ? run.min_sigma_z : std::min(table.min_sigma_z, run.min_sigma_z);
    table.rows.push_back(row);
  }
  double sum = 0.0;
  int count = 0;
  table.min_order = std::numeric_limits<double>::infinity();
  table.all_floor = true;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    ConvergenceRow& r = table.rows[i];
    table.all_floor = table.all_floor && r.floor;
    if (i == 0) continue;
    r.order = std::log2(table.rows[i - 1].error / r.error);
    if (!r.floor && !table.rows[i - 1].floor) {
      sum += r.order;
      table.min_order = std::min(table.min_order, r.order);
      ++count;
    }
  }
  table.mean_order = count > 0 ? sum / count : 0.0;
  if (count == 0) table.min_order = 0.0;
  table.pass = table.all_floor || (count > 0 && table.min_order >= cfg.order_threshold);
  if (log != nullptr) {
    for (const auto& r : table.rows) {
      *log << "eps=" << format_double(r.eps) << " error=" << format_double(r.error)
           << " order=" << format_double(r.order) << (r.floor ? " floor" : "") << '\n';
    }
  }
  return table;
}

int cmd_convergence(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log, ConvergenceTable* out) {
  Stopwatch sw;
  const ConvergenceTable table = convergence_study(cfg, threads, &log);
  report.timings["convergence"] = sw.lap();
  const fs::path dir = out_dir(cfg);
  {
    std::ofstream csv = open_out(dir / "convergence.csv");
    csv << "eps,error,order,flag,projection_residual,seconds\n";
    for (const auto& r : table.rows) {
      csv << format_double(r.eps) << ',' << format_double(r.error) << ',' << format_double(r.order) << ','
          << (r.floor ? "floor" : "") << ',' << format_double(r.projection_residual) << ',' << format_double(r.seconds)
          << '\n';
    }
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    report.errors["eps_" + std::to_string(i)] = table.rows[i].error;
  }
  report.monitors["mean_order"] = table.mean_order;
  report.monitors["min_order"] = table.min_order;
  report.monitors["max_symplecticity_residual"] = table.max_sympl_residual;
  report.monitors["min_sigma_z"] = table.min_sigma_z;
  report.notes["summary"] = table.all_floor ? "PASS (floor)" : table.pass ? "PASS" : "FAIL";
  log << "min order " << format_double(table.min_order) << ", mean " << format_double(table.mean_order) << ": "
      << report.notes["summary"] << '\n';
  if (out != nullptr) *out = table;
  return table.pass ? kExitOk : kExitNumeric;
}

int cmd_report(const std::string& path, std::ostream& log) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "report.ini";
  const RunReport r = RunReport::load(p.string());
  if (!(RunReport::parse(r.serialize()) == r)) fail(ErrorKind::kConsistency, "report does not round-trip");
  log << "command: " << r.command << " (threads " << r.threads << ")\n";
  for (const auto& [k, v] : r.monitors) log << "  " << k << " = " << format_double(v) << '\n';
  for (const auto& [k, v] : r.errors) log << "  error " << k << " = " << format_double(v) << '\n';
  for (const auto& [k, v] : r.timings) log << "  time " << k << " = " << format_double(v) << " s\n";
  for (const auto& [k, v] : r.notes) log << "  " << k << ": " << v << '\n';
  return kExitOk;
}

}  // namespace fga
