#pragma once

#include "fga/pipeline.hpp"
#include "fga/potential.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fga {

// Lattice potential spec: "zero", "cos(amp=a,axis=i)", "fourier(k=k1[;k2],re=..,im=..)"
// joined by '+', or "file(path=...)" in the PeriodicPotential text format.
PeriodicPotential parse_lattice_spec(const std::string& spec, int dim);

struct RunConfig {
  // [potential]
  int dim = 1;
  std::string lattice = "cos(amp=1)";
  std::string external = "zero";
  // [numerics]
  std::vector<double> eps{1.0 / 32};
  int nodes = 128;  // M per axis
  int cutoff = 16;  // K
  int n_bands = 3;
  double c_g = 0.5;
  double r_c = 8.0;
  double dt = 1e-3;
  double length = 4.0;
  int points_per_cell = 32;
  double seed_threshold = 1e-8;
  double reference_dt_divisor = 64.0;
  bool track_a1 = true;
  // [initial]
  std::string initial_type = "gaussian-packet";  // or "file"
  std::vector<double> q0{2.0};
  std::vector<double> p0{0.5};
  double width = 1.0;
  int packet_band = 1;  // 1-based
  std::string initial_file;
  // [run]
  std::string mode = "propagate";
  double T = 0.5;
  std::vector<double> checkpoints;  // empty: 0, T/2, T
  std::string out = "out";
  std::vector<int> bands{1};  // 1-based
  // [tolerances]
  double t0_consistency = 1e-10;
  double sympl_tolerance = 1e-6;
  double sigma_floor = 1.0;
  double gap_factor = 10.0;
  double order_threshold = 0.8;
  double error_floor = 1e-6;
  double memory_limit_mb = 4096.0;

  bool operator==(const RunConfig&) const = default;

  // Throws kConfig naming the offending key.
  void validate() const;
  std::vector<double> checkpoint_times() const;
  PeriodicPotential lattice_potential() const { return parse_lattice_spec(lattice, dim); }
  ExternalPotential external_potential() const { return ExternalPotential::parse(external, dim); }
  FgaOptions fga_options() const;
  std::vector<int> band_indices() const;  // 0-based

  // INI text. `overrides` are "section.key=value" strings applied before parsing.
  static RunConfig parse(std::istream& in, const std::vector<std::string>& overrides = {});
  static RunConfig parse(const std::string& text, const std::vector<std::string>& overrides = {});
  static RunConfig load(const std::string& path, const std::vector<std::string>& overrides = {});
  std::string serialize() const;
};

struct RunReport {
  std::string command;
  int threads = 1;
  RunConfig config;
  std::map<std::string, double> monitors;
  std::map<std::string, double> errors;
  std::map<std::string, double> timings;  // seconds per stage
  std::map<std::string, std::string> notes;

  bool operator==(const RunReport&) const = default;
  std::string serialize() const;
  static RunReport parse(const std::string& text);
  static RunReport load(const std::string& path);
};

// Exit codes of the command-line front end.
enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitResource = 4 };
int exit_code_for(ErrorKind kind);

// Initial field for one eps on the configured grid.
WaveField initial_field(const RunConfig& cfg, double eps, const BandTable& table);

// Band-1-style closed form for V = 0 and U = 0 or U = |x - c|^2 / 2, else empty.
bool analytic_available(const RunConfig& cfg);
WaveField analytic_solution(const RunConfig& cfg, double eps, double t);

struct ConvergenceRow {
  double eps = 0.0;
  double error = 0.0;  // |psi_FGA(T) - psi_ref(T)| / |psi0|
  double order = 0.0;  // log2(E(2 eps) / E(eps)); 0 on the first row
  bool floor = false;
  double projection_residual = 0.0;
  double seconds = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double mean_order = 0.0;
  double min_order = 0.0;  // over pairs where neither row is on the floor
  double max_sympl_residual = 0.0;
  double min_sigma_z = 0.0;
  bool all_floor = false;
  bool pass = false;
};

// Commands. Each writes into cfg.out, fills the report and returns an exit code.
// Errors propagate as fga::Error with the stage named in the message.
int cmd_bands(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log);
int cmd_decompose(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log);
int cmd_propagate(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log);
int cmd_reference(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log);
int cmd_convergence(const RunConfig& cfg, int threads, RunReport& report, std::ostream& log,
                    ConvergenceTable* table = nullptr);
int cmd_report(const std::string& path, std::ostream& log);

// Runs one convergence study without touching the file system.
ConvergenceTable convergence_study(const RunConfig& cfg, int threads, std::ostream* log = nullptr);

}  // namespace fga
