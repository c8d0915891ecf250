#pragma once

// Classical mean-field dynamics, adiabatic cavity elimination, effective
// potentials and fixed-point enumeration. Units: kappa = hbar = 1.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "optomech/hilbert.hpp"
#include "optomech/model.hpp"
#include "optomech/ode.hpp"

namespace optomech {

struct MeanFieldState {
  std::vector<double> x;
  std::vector<double> p;
  /// Cavity amplitude; absent when the cavity is adiabatically eliminated.
  std::optional<cplx> alpha;
};

enum class Stability { Stable, Unstable };

std::string_view to_string(Stability s);

struct SteadyStateSolution {
  std::vector<double> x_s;
  Stability stability = Stability::Stable;
  double potential_value = 0.0;
  /// A Hessian eigenvalue is numerically zero (e.g. along a ring of minima).
  bool degenerate = false;
};

/// Time derivative of the mean-field equations, including damping -gamma_k p_k / 2.
/// With alpha present the cavity is integrated explicitly, otherwise it is
/// replaced by adiabatic_cavity_field.
MeanFieldState meanfield_rhs(const MeanFieldState& state, const SystemParams& params);

/// Detuning seen by the cavity: Delta_c + sum g x (linear) or Delta_c - sum g x^2 (quadratic).
double effective_detuning(std::span<const double> x, const SystemParams& params);

/// alpha = eta / (-i s + kappa/2) with s from effective_detuning.
cplx adiabatic_cavity_field(std::span<const double> x, const SystemParams& params);

/// U_eff = (omega_m/2) sum x^2 - 2 eta^2 arctan(2 s).
double effective_potential(std::span<const double> x, const SystemParams& params);
Eigen::VectorXd potential_gradient(std::span<const double> x, const SystemParams& params);
Eigen::MatrixXd potential_hessian(std::span<const double> x, const SystemParams& params);

/// Hessian classification. Minimum eigenvalue >= -tol counts as Stable; any
/// |eigenvalue| <= tol sets `degenerate`. tol scales with omega_m.
std::pair<Stability, bool> classify_point(std::span<const double> x, const SystemParams& params);

/// All fixed points for linear coupling. Every solution has x_j = g_j c with c
/// a real root of G^2 c^3 + 2 Delta G c^2 + (Delta^2 + 1/4) c - eta^2/omega_m,
/// G = sum g_k^2, which covers unequal couplings exactly.
std::vector<SteadyStateSolution> linear_steady_states(const SystemParams& params);

/// Coefficients (descending) of the equal-coupling cubic in x_s.
std::vector<double> linear_cubic_coefficients(const SystemParams& params);

/// |Delta_c| / kappa > sqrt(3)/2.
bool multistability_condition(const SystemParams& params);

/// Fixed points for quadratic coupling: x = 0 plus, for each group of modes
/// sharing one negative coupling, both branches of
///   sum_S x^2 = (-Delta_c +/- sqrt(2|g| eta^2/omega_m - 1/4)) / |g|.
/// A group of more than one mode yields a sphere of solutions; it is
/// represented by the points +/-R e_k and flagged degenerate.
std::vector<SteadyStateSolution> quadratic_steady_states(const SystemParams& params);

/// (eta_1, eta_2) for the most negative quadratic coupling. DomainError if none is negative.
std::pair<double, double> quadratic_critical_pump_rates(const SystemParams& params);

/// Radius of the ring of minima for equal negative quadratic couplings.
/// DomainError when the radicand or the squared radius is negative.
double sombrero_radius(const SystemParams& params);

/// omega_m - kappa^2 omega_m^2 / (8 |g| eta^2), with g the most negative quadratic coupling.
double well_oscillation_frequency(const SystemParams& params);

/// (omega_m/2) sum p^2 + U_eff: conserved by the adiabatic equations when gamma = 0.
double mechanical_energy(const MeanFieldState& state, const SystemParams& params);

struct MeanFieldTrajectory {
  std::vector<double> times;
  std::vector<MeanFieldState> states;
};

/// Default tolerances for classical work: rtol 1e-9, atol 1e-12, serial.
ode::Options meanfield_ode_options();

MeanFieldTrajectory integrate_meanfield(const MeanFieldState& initial, const SystemParams& params,
                                        std::span<const double> times,
                                        const ode::Options& options = meanfield_ode_options());

}  // namespace optomech
