#include "fga/errors.hpp"
#include "fga/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fga;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fga_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an fga::Error");
  return ErrorKind::kNumeric;
}

// Small free-packet setup that runs in well under a second.
RunConfig small_free(const fs::path& out) {
  return RunConfig::parse(
      "[potential]\nV = zero\n[numerics]\neps = 0.0625\nM = 64\nK = 4\nn_bands = 1\nlength = 4\n"
      "points_per_cell = 8\ntrack_a1 = false\n[initial]\nq0 = 2\np0 = 0.5\n[run]\nT = 0.2\nout = " +
      out.string() + "\n[tolerances]\ngap_factor = 0\n");
}

}  // namespace

TEST_CASE("config defaults validate and round-trip") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(RunConfig::parse(c.serialize()) == c);
  const RunConfig d = RunConfig::parse(
      "[potential]\nV = cos(amp=2) + fourier(k=2,re=0.1,im=0)+fourier(k=-2,re=0.1,im=0)\n"
      "U = harmonic(omega=1.5,center=2)\n[numerics]\neps = 0.05, 0.025, 0.0125\n[run]\ncheckpoints = 0, 0.1, 0.3\n");
  CHECK(RunConfig::parse(d.serialize()) == d);
  CHECK(d.eps.size() == 3);
  CHECK(d.lattice_potential().coefficient({2, 0}).real() == doctest::Approx(0.1));
  CHECK(d.lattice_potential().coefficient({1, 0}).real() == doctest::Approx(1.0));
  CHECK(d.checkpoint_times() == std::vector<double>{0.0, 0.1, 0.3});
  CHECK(c.checkpoint_times() == std::vector<double>{0.0, 0.25, 0.5});
}

TEST_CASE("overrides replace file values") {
  const RunConfig c = RunConfig::parse("[numerics]\nM = 64\n", {"numerics.M=256", "run.T=1.5", "run.bands=1,2"});
  CHECK(c.nodes == 256);
  CHECK(c.T == 1.5);
  CHECK(c.bands == std::vector<int>{1, 2});
}

TEST_CASE("range checks reject bad values with a config error") {
  for (const char* bad : {"numerics.eps=0", "numerics.eps=1.5", "numerics.M=100", "numerics.K=0", "numerics.n_bands=0",
                          "numerics.dt=-1", "numerics.r_c=0.5", "numerics.points_per_cell=4", "numerics.length=1.03",
                          "run.bands=4", "run.bands=1,1", "run.checkpoints=0.4,0.2", "run.T=-1", "run.mode=fly",
                          "initial.band=9", "initial.q0=1,2", "potential.dim=3", "potential.U=wobble(a=1)",
                          "potential.V=cos(amp=1,axis=1)", "numerics.K=x", "nosuch.key=1"}) {
    INFO(bad);
    CHECK(kind_of([&] { RunConfig::parse("", {bad}); }) == ErrorKind::kConfig);
  }
  CHECK(kind_of([&] { RunConfig::parse("[numerics]\nbogus = 1\n"); }) == ErrorKind::kConfig);
}

TEST_CASE("report round-trips through text") {
  RunReport r;
  r.command = "propagate";
  r.threads = 3;
  r.config = RunConfig::parse("", {"numerics.eps=0.03125", "run.T=0.25"});
  r.monitors["min_sigma_z"] = 1.4142135623730951;
  r.monitors["t0_consistency"] = 3.3e-16;
  r.errors["analytic_t1"] = 1.0 / 3.0;
  r.timings["bands"] = 0.1;
  r.notes["summary"] = "PASS (floor)";
  const RunReport back = RunReport::parse(r.serialize());
  CHECK(back == r);
  CHECK(back.serialize() == r.serialize());
}

TEST_CASE("exit codes follow the error class") {
  CHECK(exit_code_for(ErrorKind::kConfig) == 2);
  CHECK(exit_code_for(ErrorKind::kResolution) == 2);
  CHECK(exit_code_for(ErrorKind::kBandIsolation) == 3);
  CHECK(exit_code_for(ErrorKind::kInvariantViolation) == 3);
  CHECK(exit_code_for(ErrorKind::kResource) == 4);
}

TEST_CASE("bands command writes M rows, is deterministic and refuses crossing bands") {
  const fs::path dir = scratch("bands");
  RunConfig c = RunConfig::parse("", {"numerics.M=64", "run.out=" + dir.string()});
  RunReport r;
  std::ostringstream log;
  CHECK(cmd_bands(c, 1, r, log) == kExitOk);
  const std::string first = slurp(dir / "bands.csv");
  int lines = 0;
  for (char ch : first) lines += ch == '\n';
  CHECK(lines == 65);
  CHECK(cmd_bands(c, 1, r, log) == kExitOk);
  CHECK(slurp(dir / "bands.csv") == first);

  RunConfig free = RunConfig::parse("", {"potential.V=zero", "run.bands=2", "numerics.M=64", "run.out=" + dir.string()});
  try {
    cmd_bands(free, 1, r, log);
    FAIL("expected isolation failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBandIsolation);
    CHECK(std::string(e.what()).find("xi=(0)") != std::string::npos);
  }
}

TEST_CASE("analytic closed form is unit norm and matches the direct formula") {
  const RunConfig c = small_free(scratch("analytic"));
  REQUIRE(analytic_available(c));
  const WaveField a0 = analytic_solution(c, 0.0625, 0.0);
  CHECK(a0.norm() == doctest::Approx(1.0).epsilon(1e-10));
  const WaveField a = analytic_solution(c, 0.0625, 0.2);
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-10));
  const int i = 294;
  const double eps = 0.0625, t = 0.2, x = i * a.spacing();
  const cplx s{1.0, t};
  const double y = x - 2.0;
  const cplx expect = std::pow(kPi * eps, -0.25) *
                      std::exp(-(y - 0.5 * t) * (y - 0.5 * t) / (2.0 * eps * s) + cplx{0, 0.5 * y / eps} -
                               cplx{0, 0.125 * t / eps}) /
                      std::sqrt(s);
  CHECK(std::abs(a.data[i] - expect) < 1e-12);
  CHECK_FALSE(analytic_available(RunConfig()));
}

TEST_CASE("propagate at T = 0 returns the band projection and thresholds seeds") {
  const fs::path dir = scratch("prop0");
  RunConfig c = small_free(dir);
  c.T = 0.0;
  RunReport r;
  std::ostringstream log;
  CHECK(cmd_propagate(c, 1, r, log) == kExitOk);
  CHECK(r.monitors.at("t0_consistency") <= 1e-10);
  CHECK(r.monitors.at("seeds") < r.monitors.at("phase_space_points"));
  CHECK(fs::exists(dir / "psi_t0.wf"));
  CHECK(fs::exists(dir / "density_t0.csv"));
  const WaveField out = load_wavefield((dir / "psi_t0.wf").string());
  CHECK(out.time == 0.0);
}

TEST_CASE("free packet propagation matches the closed form") {
  const fs::path dir = scratch("prop");
  RunConfig c = small_free(dir);
  c.points_per_cell = 32;
  RunReport r;
  std::ostringstream log;
  CHECK(cmd_propagate(c, 1, r, log) == kExitOk);
  CHECK(r.errors.at("analytic_t2") < 1e-5);
  CHECK(r.monitors.at("min_sigma_z") >= std::sqrt(2.0) - 1e-6);
  RunReport rr;
  CHECK(cmd_reference(c, 1, rr, log) == kExitOk);
  CHECK(rr.errors.at("reference_vs_analytic") < 1e-6);
}

TEST_CASE("convergence needs three halving eps values and respects the memory limit") {
  const fs::path dir = scratch("conv");
  RunConfig c = small_free(dir);
  RunReport r;
  std::ostringstream log;
  CHECK(kind_of([&] { cmd_convergence(c, 1, r, log); }) == ErrorKind::kConfig);
  c.eps = {0.0625, 0.03125, 0.02};
  CHECK(kind_of([&] { cmd_convergence(c, 1, r, log); }) == ErrorKind::kConfig);
  c.eps = {0.0625, 0.03125, 0.015625};
  c.points_per_cell = 32;
  c.memory_limit_mb = 0.5;
  CHECK(kind_of([&] { cmd_convergence(c, 1, r, log); }) == ErrorKind::kResource);
}

TEST_CASE("free-space convergence sits on the floor") {
  const fs::path dir = scratch("floor");
  RunConfig c = small_free(dir);
  c.eps = {0.0625, 0.03125, 0.015625};
  c.points_per_cell = 32;
  c.nodes = 128;
  c.T = 0.1;
  RunReport r;
  std::ostringstream log;
  ConvergenceTable t;
  CHECK(cmd_convergence(c, 1, r, log, &t) == kExitOk);
  CHECK(t.all_floor);
  CHECK(r.notes.at("summary") == "PASS (floor)");
  CHECK(slurp(dir / "convergence.csv").find("floor") != std::string::npos);
}

TEST_CASE("report command reads a stored report") {
  const fs::path dir = scratch("report");
  fs::create_directories(dir);
  RunReport r;
  r.command = "bands";
  std::ofstream(dir / "report.ini") << r.serialize();
  std::ostringstream log;
  CHECK(cmd_report(dir.string(), log) == kExitOk);
  CHECK(log.str().find("command: bands") != std::string::npos);
  CHECK(kind_of([&] { cmd_report((dir / "missing.ini").string(), log); }) == ErrorKind::kConfig);
}
