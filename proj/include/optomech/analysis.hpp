#pragma once

// Observables of simulated states: reduced states, position distributions,
// Schmidt decomposition, entropies (nats) and angular momentum.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "optomech/hilbert.hpp"
#include "optomech/qdyn.hpp"

namespace optomech {

/// Reduced density matrix on the modes in `keep` (kept in ascending order).
QuantumState partial_trace(const QuantumState& state, std::span<const int> keep);

/// Tr(op rho).
cplx expectation(const Operator& op, const CMatrix& rho);

/// P(x) = sum_nm rho_nm phi_n(x) phi_m(x) for a single-mode density matrix.
Eigen::VectorXd position_distribution(const QuantumState& rho_m, std::span<const double> x);
Eigen::VectorXd position_distribution(const CMatrix& rho_m, std::span<const double> x);

/// Trapezoid-free sum P dx for a uniform grid.
double integrate_uniform(const Eigen::VectorXd& values, double dx);

struct SchmidtDecomposition {
  /// Descending, non-negative.
  Eigen::VectorXd coefficients;
  /// Columns are the Schmidt vectors of the first and second mode.
  CMatrix basis_1;
  CMatrix basis_2;
  int schmidt_number = 0;
};

/// SVD of the coefficient matrix c_{n1 n2} of a pure two-mode state.
/// DomainError for mixed or non-two-mode input.
SchmidtDecomposition schmidt_decompose(const QuantumState& psi, double threshold = 1e-3);

/// -Tr rho ln rho. Eigenvalues in [-1e-8, 0) are clipped; below that, or a
/// trace off by more than 1e-6, is a ContractViolation.
double von_neumann_entropy(const CMatrix& rho);
double von_neumann_entropy(const QuantumState& state);

struct EntropyReport {
  double s1 = 0.0;
  double s2 = 0.0;
  double joint = 0.0;
  double mutual_information = 0.0;
};

/// Entropies of a two-mode state and its marginals.
EntropyReport entropy_report(const QuantumState& rho_12);

/// S(rho_1) + S(rho_2) - S(rho_12).
double mutual_information(const QuantumState& rho_12);

/// L = x_i p_j - x_j p_i on modes (i, j) of `space`.
Operator angular_momentum_operator(const HilbertSpace& space, int mode_i, int mode_j);

struct ObservableSeries {
  std::string name;
  std::vector<double> times;
  std::vector<double> values;
};

/// <L> at every stored sample of a trajectory.
ObservableSeries angular_momentum_series(const Trajectory& traj, const HilbertSpace& space, int mode_i, int mode_j);

/// Re Tr(op rho) at every stored sample.
ObservableSeries expectation_series(const Trajectory& traj, const Operator& op, std::string name);

}  // namespace optomech
