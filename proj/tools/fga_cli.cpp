#include "fga/errors.hpp"
#include "fga/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

int run_command(const std::string& name, const std::string& config_path, const std::vector<std::string>& sets,
                int threads, const std::string& out) {
  using namespace fga;
  RunReport report;
  report.command = name;
  report.threads = threads;
  try {
    std::vector<std::string> overrides = sets;
    if (!out.empty()) overrides.push_back("run.out=" + out);
    RunConfig cfg = config_path.empty() ? RunConfig::parse(std::string(), overrides)
                                        : RunConfig::load(config_path, overrides);
    report.config = cfg;
    int code = kExitOk;
    try {
      if (name == "bands") code = cmd_bands(cfg, threads, report, std::cout);
      if (name == "decompose") code = cmd_decompose(cfg, threads, report, std::cout);
      if (name == "propagate") code = cmd_propagate(cfg, threads, report, std::cout);
      if (name == "reference") code = cmd_reference(cfg, threads, report, std::cout);
      if (name == "convergence") code = cmd_convergence(cfg, threads, report, std::cout);
    } catch (const Error& e) {
      report.notes["error"] = e.what();
      code = exit_code_for(e.kind());
      std::cerr << "error: " << e.what() << '\n';
    }
    std::filesystem::create_directories(cfg.out);
    std::ofstream(std::filesystem::path(cfg.out) / "report.ini") << report.serialize();
    return code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frozen Gaussian approximation for periodic media"};
  app.require_subcommand(1);
  std::string config_path, out;
  std::vector<std::string> sets;
  int threads = 1;
  app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override, section.key=value (repeatable)")->take_all();
  app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));
  app.add_option("--out", out, "Output directory (overrides run.out)");

  std::string report_path;
  for (const char* name : {"bands", "decompose", "propagate", "reference", "convergence"}) {
    app.add_subcommand(name, std::string("Run the ") + name + " stage");
  }
  auto* report = app.add_subcommand("report", "Print a stored report");
  report->add_option("path", report_path, "Report file or output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fga::kExitConfig;
  }
  if (report->parsed()) {
    try {
      return fga::cmd_report(report_path, std::cout);
    } catch (const fga::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return fga::exit_code_for(e.kind());
    }
  }
  return run_command(app.get_subcommands().front()->get_name(), config_path, sets, threads, out);
}
