#pragma once

// Declarative scenario runner: a JSON config in, CSV/JSON artifacts and a
// manifest out. All quantities are in kappa units.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "optomech/groundstate.hpp"
#include "optomech/hilbert.hpp"
#include "optomech/model.hpp"
#include "optomech/qdyn.hpp"

namespace optomech {

enum class Task { Potential, SteadyStates, BifurcationScan, MeanFieldEvolve, Evolve, QuantumSteadyState, GroundState, Analyze, Sweep };

std::string_view to_string(Task t);
/// CLI spelling: "potential", "steady-states", "bifurcation-scan", "meanfield",
/// "evolve", "quantum-steady-state", "ground-state", "analyze", "sweep".
Task task_from_string(std::string_view s);

struct InitialState {
  enum class Kind { Vacuum, EffectiveGroundState, Cat, Coherent };
  Kind kind = Kind::Vacuum;
  double beta0 = 0.0;
  double phi0 = 0.0;
  /// One amplitude per mechanical mode (Coherent).
  std::vector<cplx> beta;
};

struct TimeSpec {
  std::vector<double> values;
};

struct SweepSpec {
  /// Only "eta" and "delta_c" are sweepable.
  std::string parameter = "eta";
  std::vector<double> values;
};

struct ScenarioConfig {
  std::string name;
  Task task = Task::Potential;
  SystemParams params;
  /// Cavity first, then one entry per mechanical mode. Empty for classical tasks.
  std::vector<int> dims;
  InitialState initial_state;
  std::optional<TimeSpec> times;
  std::optional<GridAxis> grid;
  std::optional<SweepSpec> sweep;
  std::vector<std::string> outputs;
  SteadyStateOptions steady_state;
  /// State file consumed by the analyze task, relative to the config file.
  std::optional<std::filesystem::path> input;
  /// Fixed RK4 step for evolve/meanfield; empty selects adaptive stepping.
  std::optional<double> fixed_step;
  std::int64_t seed = 0;
  /// Echo of the parsed JSON text.
  std::string source;
  std::filesystem::path base_dir;

  bool wants(std::string_view output) const;
};

/// Parses and validates; ValidationError names the offending field.
ScenarioConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);
/// Task-specific checks (required fields present, referenced files exist).
void validate_config(const ScenarioConfig& config);

struct OutputFile {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string name;
  std::string task;
  std::string version;
  std::string config;
  InvariantDrift drift;
  double wall_seconds = 0.0;
  std::vector<OutputFile> outputs;
};

/// Runs the task, writes outputs into `out_dir` and then `manifest.json`
/// (atomically, only after success). Downstream errors are rethrown with the
/// scenario name prefixed.
RunManifest run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir);

/// Hex SHA-256 of a file's content.
std::string sha256_file(const std::filesystem::path& path);

/// Binary state file: "OMSTATE1", mode count, dims, kind (0 pure, 1 density),
/// then the complex payload in native byte order.
void write_state(const std::filesystem::path& path, const QuantumState& state);
QuantumState read_state(const std::filesystem::path& path);

}  // namespace optomech
