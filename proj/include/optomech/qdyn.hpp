#pragma once

// Master-equation time evolution, steady states and initial-state preparation.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "optomech/hilbert.hpp"
#include "optomech/model.hpp"
#include "optomech/ode.hpp"

namespace optomech {

enum class StoragePolicy { Snapshots, ObservablesOnly };

struct InvariantTolerances {
  double trace = 1e-8;
  double hermiticity = 1e-10;
  double min_eigenvalue = -1e-8;
  /// Breaches beyond this multiple of a tolerance abort the run.
  double failure_factor = 10.0;
};

/// Largest deviations seen over all samples.
struct InvariantDrift {
  double trace = 0.0;
  double hermiticity = 0.0;
  double min_eigenvalue = 0.0;  // most negative eigenvalue seen (<= 0)
  bool within_tolerance = true;
};

struct EvolveOptions {
  ode::Options ode = default_ode();
  StoragePolicy storage = StoragePolicy::Snapshots;
  /// Called at every sample time with the current density matrix.
  std::function<void(double, const CMatrix&)> observer;
  InvariantTolerances tolerances;
  /// Positivity is checked every `positivity_stride` samples (0 disables it).
  int positivity_stride = 1;

  static ode::Options default_ode() {
    ode::Options o;
    o.rtol = 1e-8;
    o.atol = 1e-10;
    return o;
  }
};

struct Trajectory {
  std::vector<double> times;
  /// Empty under StoragePolicy::ObservablesOnly.
  std::vector<CMatrix> states;
  InvariantDrift drift;
  ode::Stats stats;
};

/// Integrates the master equation from t = 0 and samples at `times`
/// (non-decreasing, >= 0). The trace is never renormalized; drift is
/// recorded and a breach beyond failure_factor x tolerance throws
/// IntegrationFailure.
Trajectory evolve(const QuantumState& rho0, const LindbladGenerator& gen, std::span<const double> times,
                  const EvolveOptions& options = {});

/// Trace-norm residual ||L(rho)||_1.
double liouvillian_residual(const LindbladGenerator& gen, const CMatrix& rho);

enum class SteadyStateMethod {
  /// ILU-preconditioned GMRES on the trace-constrained superoperator.
  Krylov,
  /// Integration with doubling horizons until the residual criterion holds.
  TimeMarching,
  /// Sparse LU on the superoperator; dimension limited to 200.
  Direct,
};

std::string_view to_string(SteadyStateMethod m);
SteadyStateMethod steady_state_method_from_string(std::string_view s);

struct SteadyStateOptions {
  SteadyStateMethod method = SteadyStateMethod::Krylov;
  double tolerance = 1e-8;
  double max_time = 1e5;
  double ilu_droptol = 1e-3;
  int ilu_fill = 5;
  int gmres_restart = 200;
  int gmres_max_iterations = 3000;
  double gmres_tolerance = 1e-12;
  /// Fall back to time marching when the Krylov result misses the tolerance.
  bool allow_fallback = true;
  ode::Options ode = EvolveOptions::default_ode();
};

struct SteadyStateResult {
  CMatrix rho;
  double residual = 0.0;
  SteadyStateMethod method = SteadyStateMethod::Krylov;
  int iterations = 0;
  double marched_time = 0.0;
};

/// Solves L(rho) = 0, Tr rho = 1. Requires decay on every mode.
/// ConvergenceError (with the residual) when the tolerance cannot be met.
SteadyStateResult steady_state(const LindbladGenerator& gen, const std::optional<CMatrix>& guess = std::nullopt,
                               const SteadyStateOptions& options = {});

/// (|beta0> + e^{i phi0} |-beta0>) normalized, including the overlap term.
QuantumState prepare_cat_state(double beta0, double phi0, int dim);

/// 2 (1 + cos(phi0) exp(-2 beta0^2)): squared norm before normalization.
double cat_norm_squared(double beta0, double phi0);

/// Cavity vacuum followed by the given single-mode mechanical states.
QuantumState cavity_vacuum_product(int cavity_dim, std::span<const QuantumState> mechanics);

/// Global vacuum |0,...,0><0,...,0|.
QuantumState vacuum_state(const HilbertSpace& space);

}  // namespace optomech
