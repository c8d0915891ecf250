#include "optomech/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "optomech/error.hpp"
#include "optomech/polynomial.hpp"

namespace optomech {

namespace {

void check_shape(std::span<const double> x, const SystemParams& params) {
  if (static_cast<int>(x.size()) != params.n_mech()) {
    throw ShapeError("position vector has " + std::to_string(x.size()) + " entries, model has " +
                     std::to_string(params.n_mech()) + " mechanical modes");
  }
}

double intensity(double s, double eta) { return eta * eta / (s * s + 0.25); }

double hessian_tolerance(const SystemParams& params) { return 1e-9 * std::max(params.omega_m, 1e-300); }

SteadyStateSolution make_solution(std::vector<double> x, const SystemParams& params) {
  SteadyStateSolution sol;
  const auto [stab, degenerate] = classify_point(x, params);
  sol.stability = stab;
  sol.degenerate = degenerate;
  sol.potential_value = effective_potential(x, params);
  sol.x_s = std::move(x);
  return sol;
}

double most_negative_coupling(const SystemParams& params) {
  if (params.coupling != Coupling::Quadratic) throw DomainError("requires quadratic coupling");
  params.validate();
  const double g = *std::min_element(params.g.begin(), params.g.end());
  if (!(g < 0.0)) throw DomainError("requires a negative quadratic coupling (g < 0)");
  return g;
}

}  // namespace

std::string_view to_string(Stability s) { return s == Stability::Stable ? "stable" : "unstable"; }

double effective_detuning(std::span<const double> x, const SystemParams& params) {
  check_shape(x, params);
  double s = params.delta_c;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (params.coupling == Coupling::Linear) {
      s += params.g[k] * x[k];
    } else {
      s -= params.g[k] * x[k] * x[k];
    }
  }
  return s;
}

cplx adiabatic_cavity_field(std::span<const double> x, const SystemParams& params) {
  const double s = effective_detuning(x, params);
  return params.eta / cplx(0.5, -s);
}

double effective_potential(std::span<const double> x, const SystemParams& params) {
  const double s = effective_detuning(x, params);
  double harmonic = 0.0;
  for (double v : x) harmonic += v * v;
  return 0.5 * params.omega_m * harmonic - 2.0 * params.eta * params.eta * std::atan(2.0 * s);
}

Eigen::VectorXd potential_gradient(std::span<const double> x, const SystemParams& params) {
  const double s = effective_detuning(x, params);
  const double f = 4.0 * params.eta * params.eta / (1.0 + 4.0 * s * s);
  Eigen::VectorXd grad(static_cast<Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double ds = params.coupling == Coupling::Linear ? params.g[j] : -2.0 * params.g[j] * x[j];
    grad(static_cast<Index>(j)) = params.omega_m * x[j] - f * ds;
  }
  return grad;
}

Eigen::MatrixXd potential_hessian(std::span<const double> x, const SystemParams& params) {
  const double s = effective_detuning(x, params);
  const double e2 = params.eta * params.eta;
  const double den = 1.0 + 4.0 * s * s;
  const double f = 4.0 * e2 / den;                 // U = ... - 2 e2 atan(2s): dU/ds = -f
  const double df = -32.0 * e2 * s / (den * den);  // d f / d s
  const auto n = static_cast<Index>(x.size());
  Eigen::MatrixXd h = params.omega_m * Eigen::MatrixXd::Identity(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double dsi = params.coupling == Coupling::Linear ? params.g[ui] : -2.0 * params.g[ui] * x[ui];
    for (Index j = 0; j < n; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const double dsj = params.coupling == Coupling::Linear ? params.g[uj] : -2.0 * params.g[uj] * x[uj];
      h(i, j) -= df * dsi * dsj;
      if (params.coupling == Coupling::Quadratic && i == j) h(i, j) -= f * (-2.0 * params.g[ui]);
    }
  }
  return h;
}

std::pair<Stability, bool> classify_point(std::span<const double> x, const SystemParams& params) {
  const Eigen::MatrixXd h = potential_hessian(x, params);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double tol = hessian_tolerance(params);
  const bool degenerate = (ev.array().abs() <= tol).any();
  const Stability stab = ev.minCoeff() >= -tol ? Stability::Stable : Stability::Unstable;
  return {stab, degenerate};
}

std::vector<double> linear_cubic_coefficients(const SystemParams& params) {
  params.validate();
  if (params.coupling != Coupling::Linear) throw DomainError("requires linear coupling");
  const double g = params.g.front();
  for (double v : params.g)
    if (v != g) throw DomainError("the single-variable cubic requires equal couplings");
  const double n = params.n_mech();
  const double d = params.delta_c;
  return {g * g * n * n, 2.0 * d * g * n, d * d + 0.25, -g * params.eta * params.eta / params.omega_m};
}

std::vector<SteadyStateSolution> linear_steady_states(const SystemParams& params) {
  params.validate();
  if (params.coupling != Coupling::Linear) throw DomainError("linear_steady_states requires linear coupling");
  const auto n = static_cast<std::size_t>(params.n_mech());
  double big_g = 0.0;
  for (double v : params.g) big_g += v * v;
  std::vector<SteadyStateSolution> out;
  if (big_g == 0.0 || params.eta == 0.0) {
    out.push_back(make_solution(std::vector<double>(n, 0.0), params));
    return out;
  }
  const double d = params.delta_c;
  const std::vector<double> coeffs = {big_g * big_g, 2.0 * d * big_g, d * d + 0.25,
                                      -params.eta * params.eta / params.omega_m};
  std::vector<double> roots = real_polynomial_roots(coeffs);
  // Near-coincident roots at a fold collapse to one fixed point.
  std::vector<double> merged;
  for (double c : roots) {
    if (merged.empty() || std::abs(c - merged.back()) > 1e-6 * std::max(1.0, std::abs(c))) merged.push_back(c);
  }
  for (double c : merged) {
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = params.g[j] * c;
    out.push_back(make_solution(std::move(x), params));
  }
  return out;
}

bool multistability_condition(const SystemParams& params) {
  if (params.coupling != Coupling::Linear) throw DomainError("multistability condition applies to linear coupling");
  return std::abs(params.delta_c) / SystemParams::kappa > std::sqrt(3.0) / 2.0;
}

std::vector<SteadyStateSolution> quadratic_steady_states(const SystemParams& params) {
  params.validate();
  if (params.coupling != Coupling::Quadratic) throw DomainError("quadratic_steady_states requires quadratic coupling");
  const auto n = static_cast<std::size_t>(params.n_mech());
  std::vector<SteadyStateSolution> out;
  out.push_back(make_solution(std::vector<double>(n, 0.0), params));
  if (params.eta == 0.0) return out;

  // x_j != 0 requires omega_m + 2 g_j |alpha|^2 = 0, so every displaced mode
  // shares one negative coupling value.
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t j = 0; j < n; ++j)
    if (params.g[j] < 0.0) groups[params.g[j]].push_back(j);

  for (const auto& [g, members] : groups) {
    const double ag = -g;
    const double radicand = 2.0 * ag * params.eta * params.eta / params.omega_m - 0.25;
    if (radicand < 0.0) continue;
    const double root = std::sqrt(radicand);
    std::vector<double> r2s = {(-params.delta_c + root) / ag};
    if (root > 0.0) r2s.push_back((-params.delta_c - root) / ag);
    for (double r2 : r2s) {
      if (!(r2 > 0.0)) continue;
      const double r = std::sqrt(r2);
      for (std::size_t k : members) {
        for (double sign : {1.0, -1.0}) {
          std::vector<double> x(n, 0.0);
          x[k] = sign * r;
          auto sol = make_solution(std::move(x), params);
          if (members.size() > 1) sol.degenerate = true;
          out.push_back(std::move(sol));
        }
      }
    }
  }
  return out;
}

std::pair<double, double> quadratic_critical_pump_rates(const SystemParams& params) {
  const double ag = -most_negative_coupling(params);
  const double w = params.omega_m;
  const double d = params.delta_c;
  return {std::sqrt(w / (8.0 * ag)), std::sqrt(w / (2.0 * ag) * (d * d + 0.25))};
}

double sombrero_radius(const SystemParams& params) {
  const double g = most_negative_coupling(params);
  for (double v : params.g)
    if (v != g) throw DomainError("sombrero radius requires equal negative couplings");
  const double ag = -g;
  const double radicand = 2.0 * ag * params.eta * params.eta / params.omega_m - 0.25;
  if (radicand < 0.0) throw DomainError("no sombrero: pump below the first critical rate (negative radicand)");
  const double r2 = (-params.delta_c + std::sqrt(radicand)) / ag;
  if (!(r2 > 0.0)) throw DomainError("no sombrero: squared radius is not positive");
  return std::sqrt(r2);
}

double well_oscillation_frequency(const SystemParams& params) {
  const double ag = -most_negative_coupling(params);
  if (!(params.eta > 0.0)) throw DomainError("well oscillation frequency requires eta > 0");
  const double w = params.omega_m;
  return w - w * w / (8.0 * ag * params.eta * params.eta);
}

MeanFieldState meanfield_rhs(const MeanFieldState& state, const SystemParams& params) {
  const auto n = static_cast<std::size_t>(params.n_mech());
  if (state.x.size() != n || state.p.size() != n) throw ShapeError("mean-field state does not match model");
  const double s = effective_detuning(state.x, params);
  MeanFieldState d;
  d.x.resize(n);
  d.p.resize(n);
  double n_photons = 0.0;
  if (state.alpha) {
    const cplx a = *state.alpha;
    d.alpha = cplx(0.0, s) * a - 0.5 * a + params.eta;
    n_photons = std::norm(a);
  } else {
    n_photons = intensity(s, params.eta);
  }
  for (std::size_t j = 0; j < n; ++j) {
    d.x[j] = params.omega_m * state.p[j];
    const double force = params.coupling == Coupling::Linear
                             ? -params.omega_m * state.x[j] + params.g[j] * n_photons
                             : -(params.omega_m + 2.0 * params.g[j] * n_photons) * state.x[j];
    d.p[j] = force - 0.5 * params.gamma[j] * state.p[j];
  }
  return d;
}

double mechanical_energy(const MeanFieldState& state, const SystemParams& params) {
  double kinetic = 0.0;
  for (double v : state.p) kinetic += v * v;
  return 0.5 * params.omega_m * kinetic + effective_potential(state.x, params);
}

ode::Options meanfield_ode_options() {
  ode::Options o;
  o.rtol = 1e-9;
  o.atol = 1e-12;
  o.exec = kernels::Exec::Serial;
  return o;
}

MeanFieldTrajectory integrate_meanfield(const MeanFieldState& initial, const SystemParams& params,
                                        std::span<const double> times, const ode::Options& options) {
  params.validate();
  const auto n = static_cast<std::size_t>(params.n_mech());
  if (initial.x.size() != n || initial.p.size() != n) throw ShapeError("mean-field state does not match model");
  const bool cavity = initial.alpha.has_value();
  const auto len = static_cast<Index>(2 * n + (cavity ? 2 : 0));

  auto pack = [&](const MeanFieldState& st, Eigen::VectorXd& v) {
    for (std::size_t j = 0; j < n; ++j) {
      v(static_cast<Index>(j)) = st.x[j];
      v(static_cast<Index>(n + j)) = st.p[j];
    }
    if (cavity) {
      v(len - 2) = st.alpha->real();
      v(len - 1) = st.alpha->imag();
    }
  };
  auto unpack = [&](const Eigen::VectorXd& v) {
    MeanFieldState st;
    st.x.resize(n);
    st.p.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      st.x[j] = v(static_cast<Index>(j));
      st.p[j] = v(static_cast<Index>(n + j));
    }
    if (cavity) st.alpha = cplx(v(len - 2), v(len - 1));
    return st;
  };

  Eigen::VectorXd y(len);
  pack(initial, y);
  MeanFieldTrajectory traj;
  auto rhs = [&](double, const Eigen::VectorXd& v, Eigen::VectorXd& dv) { pack(meanfield_rhs(unpack(v), params), dv); };
  auto obs = [&](double t, const Eigen::VectorXd& v) {
    MeanFieldState st = unpack(v);
    for (double val : st.x)
      if (!std::isfinite(val)) throw IntegrationFailure("mean-field state became non-finite at t = " + std::to_string(t));
    traj.times.push_back(t);
    traj.states.push_back(std::move(st));
  };
  ode::integrate<double>(rhs, y, 0.0, times, options, obs);
  return traj;
}

}  // namespace optomech
