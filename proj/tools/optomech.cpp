// Command-line front end: one subcommand per scenario task.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "optomech/error.hpp"
#include "optomech/kernels.hpp"
#include "optomech/scenario.hpp"

namespace {

constexpr int kValidationExit = 2;
constexpr int kNumericalExit = 3;

struct Flags {
  std::string config;
  std::string out_dir;
  double fixed_step = 0.0;
  int threads = 0;
};

int run(const std::string& command, const Flags& flags) {
  using namespace optomech;
  try {
    ScenarioConfig config = load_config(flags.config);
    if (command != "validate") {
      const Task task = task_from_string(command);
      if (config.task != task) {
        throw ValidationError("task", "config declares \"" + std::string(to_string(config.task)) + "\" but \"" + command +
                                          "\" was requested");
      }
    }
    if (flags.fixed_step > 0.0) config.fixed_step = flags.fixed_step;
    if (flags.threads > 0) kernels::set_thread_count(flags.threads);
    validate_config(config);
    if (command == "validate") {
      std::cout << config.name << ": ok (" << to_string(config.task) << ")\n";
      return 0;
    }
    const std::filesystem::path out = flags.out_dir.empty() ? std::filesystem::path("out") / config.name : std::filesystem::path(flags.out_dir);
    const auto manifest = run_scenario(config, out);
    for (const auto& f : manifest.outputs) std::cout << (out / f.path).string() << "\n";
    std::cout << (out / "manifest.json").string() << "\n";
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationExit;
  } catch (const DomainError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationExit;
  } catch (const ShapeError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationExit;
  } catch (const ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << " (residual " << e.residual() << ")\n";
    return kNumericalExit;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalExit;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity optomechanics simulator (all quantities in units of kappa)"};
  app.set_version_flag("--version", std::string(OPTOMECH_VERSION));
  app.require_subcommand(1);
  Flags flags;
  const std::pair<const char*, const char*> commands[] = {
      {"potential", "Effective mechanical potential on a grid"},
      {"steady-states", "Classical fixed points and their stability"},
      {"bifurcation-scan", "Classical fixed points over a parameter sweep"},
      {"meanfield", "Integrate the mean-field equations"},
      {"ground-state", "Imaginary-time ground state of the effective potential"},
      {"evolve", "Master-equation time evolution"},
      {"quantum-steady-state", "Steady state of the master equation"},
      {"analyze", "Reduced states, entropies and P(x) of a stored state"},
      {"sweep", "Quantum steady states across a parameter sweep"},
      {"validate", "Check a config without running it"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", flags.out_dir, "Output directory (default out/<name>)");
    sub->add_option("--fixed-step", flags.fixed_step, "Fixed RK4 step in 1/kappa (reproducible mode)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--threads", flags.threads, "OpenMP threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }
  return run(app.get_subcommands().front()->get_name(), flags);
}
