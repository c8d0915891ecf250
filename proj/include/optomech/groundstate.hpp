#pragma once

// Ground state of the effective mechanical potential on a position grid
// (one or two coordinates) by imaginary-time split-step propagation, and its
// projection onto harmonic-oscillator Fock states.
//
// The Hamiltonian is -(omega_m/2) Laplacian + U_eff(x): the cavity enters only
// through its mean field, so this is not the ground state of the full
// cavity-mechanics system.

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "optomech/hilbert.hpp"
#include "optomech/model.hpp"

namespace optomech {

struct GridAxis {
  double x_min = -12.0;
  double x_max = 12.0;
  int n_points = 512;

  double spacing() const { return (x_max - x_min) / n_points; }
  /// Periodic grid: x_i = x_min + i dx for i < n_points (x_max excluded).
  double at(int i) const { return x_min + i * spacing(); }
  std::vector<double> points() const;
};

/// Real wavefunction sampled on a 1-D or 2-D grid; index i1 * n2 + i2 (last axis fastest).
struct PositionGrid {
  std::vector<GridAxis> axes;
  Eigen::VectorXd values;

  int dims() const { return static_cast<int>(axes.size()); }
  Index size() const;
  double cell_volume() const;
  /// sum |psi|^2 dV
  double norm_squared() const;
};

/// [-12, 12] x 512 for one coordinate, [-8, 8]^2 x 256^2 for two.
PositionGrid default_grid(int n_coordinates);

struct GroundStateOptions {
  /// Initial imaginary time step; 0 selects 0.1 / omega_m.
  double dtau = 0.0;
  /// Relative energy change between iterations that counts as stationary.
  double energy_tolerance = 1e-12;
  int max_iterations = 200000;
  /// Passes at successively halved steps after the first convergence,
  /// reducing the splitting error.
  int refinements = 3;
  double boundary_tolerance = 1e-8;
  /// Required distance between every classical minimum and the grid edge.
  double margin = 4.0;
};

struct GroundStateResult {
  PositionGrid psi;
  double energy = 0.0;
  int iterations = 0;
  int rejected_steps = 0;
  double final_dtau = 0.0;
  /// Energy after every accepted step.
  std::vector<double> energy_history;
};

/// Imaginary-time ground state of -(omega_m/2) Laplacian + U_eff. The result is
/// real, normalized, with sum psi > 0, symmetrized under reflections and
/// coordinate exchange that leave U_eff invariant on the grid.
/// Throws BoundaryLeak, ConvergenceError, DomainError (grid misses a minimum).
GroundStateResult solve_ground_state(const SystemParams& params, const PositionGrid& grid,
                                     const GroundStateOptions& options = {});

/// Normalized Hermite functions phi_0..phi_{n_max} at the given points,
/// returned as a (points x (n_max+1)) matrix. Uses the normalized upward
/// recurrence with running rescaling, so it neither overflows nor underflows.
Eigen::MatrixXd hermite_functions(int n_max, std::span<const double> x);

struct FockProjection {
  std::vector<int> dims;
  /// Last mode fastest, renormalized.
  CVector coefficients;
  /// L2 norm of psi minus its truncated expansion, before renormalization.
  double reconstruction_error = 0.0;

  QuantumState state() const;
};

/// c_n = integral phi_n(x) psi(x) dx (tensor products for two coordinates).
/// Throws TruncationInadequate when the reconstruction error exceeds 1e-3;
/// warns above 1e-4.
FockProjection fock_project(const PositionGrid& psi, std::span<const int> dims);

}  // namespace optomech
