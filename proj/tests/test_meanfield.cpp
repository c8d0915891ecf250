#include <algorithm>
#include <functional>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "optomech/error.hpp"
#include "optomech/meanfield.hpp"
#include "optomech/polynomial.hpp"

using namespace optomech;

namespace {

SystemParams fig1(double eta) {
  SystemParams p;
  p.coupling = Coupling::Linear;
  p.g = {0.3};
  p.gamma = {0.002};
  p.delta_c = -1.5;
  p.eta = eta;
  p.omega_m = 0.01;
  return p;
}

SystemParams quad(double eta, int n = 1) {
  SystemParams p;
  p.coupling = Coupling::Quadratic;
  p.g.assign(static_cast<std::size_t>(n), -0.2);
  p.gamma.assign(static_cast<std::size_t>(n), 0.001);
  p.delta_c = -0.02;
  p.eta = eta;
  p.omega_m = 0.01;
  return p;
}

/// Real roots of f on [a, b] by sign changes on a dense grid, refined by bisection.
template <class F>
std::vector<double> bracket_roots(F f, double a, double b, int cells) {
  std::vector<double> out;
  const double h = (b - a) / cells;
  double x0 = a;
  double f0 = f(x0);
  for (int i = 1; i <= cells; ++i) {
    const double x1 = a + i * h;
    const double f1 = f(x1);
    if (f0 == 0.0) {
      out.push_back(x0);
    } else if (f0 * f1 < 0.0) {
      double lo = x0, hi = x1, flo = f0;
      for (int k = 0; k < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++k) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      out.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  return out;
}

double golden_minimize(const std::function<double(double)>& f, double a, double b) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-12) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Damped Newton on grad U = 0 from a 5^N grid of seeds; duplicates merged at 1e-6.
std::vector<std::vector<double>> newton_multistart(const SystemParams& p, double lo, double hi) {
  const int n = p.n_mech();
  std::vector<std::vector<double>> found;
  int total = 1;
  for (int k = 0; k < n; ++k) total *= 5;
  for (int s = 0; s < total; ++s) {
    std::vector<double> x(static_cast<std::size_t>(n));
    int rem = s;
    for (int k = 0; k < n; ++k) {
      x[static_cast<std::size_t>(k)] = lo + (hi - lo) * (rem % 5) / 4.0;
      rem /= 5;
    }
    for (int it = 0; it < 500; ++it) {
      const Eigen::VectorXd g = potential_gradient(x, p);
      if (g.norm() < 1e-13) break;
      const Eigen::VectorXd step = potential_hessian(x, p).fullPivLu().solve(g);
      double lambda = 1.0;
      for (int k = 0; k < 40; ++k) {
        std::vector<double> trial = x;
        for (int j = 0; j < n; ++j) trial[static_cast<std::size_t>(j)] -= lambda * step(j);
        if (potential_gradient(trial, p).norm() < g.norm()) {
          x = trial;
          break;
        }
        lambda *= 0.5;
      }
    }
    if (potential_gradient(x, p).norm() > 1e-10) continue;
    bool dup = false;
    for (const auto& f : found) {
      double d = 0.0;
      for (int j = 0; j < n; ++j) d = std::max(d, std::abs(f[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(j)]));
      if (d < 1e-6) dup = true;
    }
    if (!dup) found.push_back(x);
  }
  return found;
}

}  // namespace

TEST_CASE("rhs vanishes at rest without pump") {
  SystemParams p = fig1(0.0);
  MeanFieldState s{{0.0}, {0.0}, cplx(0.0)};
  const auto d = meanfield_rhs(s, p);
  CHECK(d.x[0] == 0.0);
  CHECK(d.p[0] == 0.0);
  CHECK(*d.alpha == cplx(0.0));
}

TEST_CASE("cavity relaxes to the adiabatic field with mechanics frozen") {
  const SystemParams p = fig1(0.18);
  const std::vector<double> x = {2.0};
  const cplx target = adiabatic_cavity_field(x, p);
  const double s = effective_detuning(x, p);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
  const std::vector<double> times = {5.0, 20.0};
  std::vector<cplx> samples;
  ode::integrate<double>(
      [&](double, const Eigen::VectorXd& v, Eigen::VectorXd& dv) {
        MeanFieldState st{x, {0.0}, cplx(v(0), v(1))};
        const cplx da = *meanfield_rhs(st, p).alpha;
        dv(0) = da.real();
        dv(1) = da.imag();
      },
      y, 0.0, times, meanfield_ode_options(), [&](double, const Eigen::VectorXd& v) { samples.emplace_back(v(0), v(1)); });
  // exact transient alpha(t) = alpha_ad (1 - e^{(i s - 1/2) t})
  const cplx exact5 = target * (1.0 - std::exp(cplx(-0.5, s) * 5.0));
  CHECK(std::abs(samples[0] - exact5) < 1e-8);
  CHECK(std::abs(samples[1] - target) < 1e-4);
}

TEST_CASE("quadratic radiation force vanishes at the origin") {
  SystemParams p = quad(0.2);
  MeanFieldState s{{0.0}, {0.0}, std::nullopt};
  CHECK(meanfield_rhs(s, p).p[0] == 0.0);
  s.alpha = cplx(0.3, 0.1);
  CHECK(meanfield_rhs(s, p).p[0] == 0.0);
}

TEST_CASE("adiabatic cavity field") {
  SystemParams p = fig1(0.18);
  p.delta_c = 0.0;
  const std::vector<double> zero = {0.0};
  CHECK(std::abs(adiabatic_cavity_field(zero, p) - cplx(0.36)) < 1e-15);
  p.delta_c = -1.5;
  CHECK(std::norm(adiabatic_cavity_field(zero, p)) == doctest::Approx(0.01296).epsilon(1e-12));
  // Lorentzian peak at Delta + g x = 0
  const double xpeak = 1.5 / 0.3;
  const std::vector<double> at = {xpeak}, left = {xpeak - 1e-3}, right = {xpeak + 1e-3};
  const double peak = std::norm(adiabatic_cavity_field(at, p));
  CHECK(peak > std::norm(adiabatic_cavity_field(left, p)));
  CHECK(peak > std::norm(adiabatic_cavity_field(right, p)));
  CHECK(peak == doctest::Approx(4.0 * 0.18 * 0.18));
}

TEST_CASE("effective potential") {
  SystemParams p = fig1(0.0);
  const std::vector<double> x = {1.7};
  CHECK(effective_potential(x, p) == doctest::Approx(0.5 * 0.01 * 1.7 * 1.7 - 0.0));

  // double well inside the bistable window, single well below it
  p.eta = 0.24;
  int minima = 0, maxima = 0;
  const int n = 16000;
  std::vector<double> u(n + 1);
  for (int i = 0; i <= n; ++i) {
    const std::vector<double> xi = {-2.0 + 16.0 * i / n};
    u[static_cast<std::size_t>(i)] = effective_potential(xi, p);
  }
  for (int i = 1; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (u[k] < u[k - 1] && u[k] < u[k + 1]) ++minima;
    if (u[k] > u[k - 1] && u[k] > u[k + 1]) ++maxima;
  }
  CHECK(minima == 2);
  CHECK(maxima == 1);
  p.eta = 0.18;
  minima = 0;
  for (int i = 0; i <= n; ++i) {
    const std::vector<double> xi = {-2.0 + 16.0 * i / n};
    u[static_cast<std::size_t>(i)] = effective_potential(xi, p);
  }
  for (int i = 1; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (u[k] < u[k - 1] && u[k] < u[k + 1]) ++minima;
  }
  CHECK(minima == 1);
}

TEST_CASE("finite-difference gradient matches the mean-field force") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> ux(-6.0, 12.0);
  for (auto coupling : {Coupling::Linear, Coupling::Quadratic}) {
    SystemParams p = fig1(0.18);
    p.coupling = coupling;
    p.g = {0.3, coupling == Coupling::Linear ? 0.2 : -0.2};
    p.gamma = {0.0, 0.0};
    for (int k = 0; k < 50; ++k) {
      const std::vector<double> x = {ux(rng), ux(rng)};
      const auto force = meanfield_rhs(MeanFieldState{x, {0.0, 0.0}, std::nullopt}, p).p;
      const auto grad = potential_gradient(x, p);
      for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> xp = x, xm = x;
        const double h = 1e-5;
        xp[j] += h;
        xm[j] -= h;
        const double fd = (effective_potential(xp, p) - effective_potential(xm, p)) / (2.0 * h);
        CHECK(std::abs(fd + force[j]) < 1e-6);
        CHECK(std::abs(grad(static_cast<Index>(j)) + force[j]) < 1e-14);
      }
    }
  }
}

TEST_CASE("Hessian matches finite differences of the gradient") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> ux(-4.0, 4.0);
  for (auto coupling : {Coupling::Linear, Coupling::Quadratic}) {
    SystemParams p = quad(0.22, 2);
    p.coupling = coupling;
    p.g = {0.2, -0.15};
    for (int k = 0; k < 20; ++k) {
      const std::vector<double> x = {ux(rng), ux(rng)};
      const Eigen::MatrixXd h = potential_hessian(x, p);
      for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> xp = x, xm = x;
        xp[j] += 1e-6;
        xm[j] -= 1e-6;
        const Eigen::VectorXd col = (potential_gradient(xp, p) - potential_gradient(xm, p)) / 2e-6;
        CHECK((h.col(static_cast<Index>(j)) - col).cwiseAbs().maxCoeff() < 1e-7);
      }
    }
  }
}

TEST_CASE("linear steady states") {
  auto roots_at = [](double eta) { return linear_steady_states(fig1(eta)); };
  const auto r0 = roots_at(0.0);
  REQUIRE(r0.size() == 1);
  CHECK(r0[0].x_s[0] == 0.0);
  CHECK(r0[0].stability == Stability::Stable);

  // three roots only for eta in about [0.202, 0.265]
  const auto r24 = roots_at(0.24);
  REQUIRE(r24.size() == 3);
  CHECK(r24[0].stability == Stability::Stable);
  CHECK(r24[1].stability == Stability::Unstable);
  CHECK(r24[2].stability == Stability::Stable);
  CHECK(roots_at(0.18).size() == 1);
  CHECK(roots_at(0.14).size() == 1);
  CHECK(roots_at(0.34).size() == 1);

  for (double eta : {0.05, 0.14, 0.18, 0.2, 0.24, 0.34}) {
    const SystemParams p = fig1(eta);
    const auto coeffs = linear_cubic_coefficients(p);
    const auto oracle = bracket_roots([&](double x) { return polyval(coeffs, x); }, -10.0, 50.0, 600000);
    const auto found = linear_steady_states(p);
    REQUIRE(found.size() == oracle.size());
    for (std::size_t k = 0; k < found.size(); ++k) {
      CHECK(std::abs(found[k].x_s[0] - oracle[k]) < 1e-9);
      CHECK(potential_gradient(found[k].x_s, p).norm() < 1e-9);
    }
  }
}

TEST_CASE("unequal linear couplings agree with multi-start Newton") {
  SystemParams p = fig1(0.16);
  p.g = {0.3, 0.12};
  p.gamma = {0.002, 0.002};
  const auto found = linear_steady_states(p);
  const auto oracle = newton_multistart(p, -2.0, 12.0);
  REQUIRE(found.size() == oracle.size());
  for (const auto& s : found) {
    CHECK(potential_gradient(s.x_s, p).norm() < 1e-9);
    bool matched = false;
    for (const auto& o : oracle)
      if (std::abs(o[0] - s.x_s[0]) < 1e-6 && std::abs(o[1] - s.x_s[1]) < 1e-6) matched = true;
    CHECK(matched);
    // x_j / g_j is common to all modes
    CHECK(s.x_s[0] / 0.3 == doctest::Approx(s.x_s[1] / 0.12));
  }
}

TEST_CASE("multistability condition") {
  SystemParams p = fig1(0.18);
  CHECK(multistability_condition(p));
  p.delta_c = -0.5;
  CHECK_FALSE(multistability_condition(p));
  p.delta_c = -std::sqrt(3.0) / 2.0;
  CHECK_FALSE(multistability_condition(p));
  CHECK_THROWS_AS(multistability_condition(quad(0.1)), DomainError);
}

TEST_CASE("quadratic steady states") {
  SystemParams pos = quad(0.3);
  pos.g = {0.2};
  const auto only = quadratic_steady_states(pos);
  REQUIRE(only.size() == 1);
  CHECK(only[0].x_s[0] == 0.0);

  const SystemParams p = quad(0.17);
  const auto sols = quadratic_steady_states(p);
  int stable_nonzero = 0;
  for (const auto& s : sols) {
    CHECK(potential_gradient(s.x_s, p).norm() < 1e-9);
    if (s.x_s[0] == 0.0) {
      CHECK(s.stability == Stability::Unstable);
    } else if (s.stability == Stability::Stable) {
      ++stable_nonzero;
      const double r = golden_minimize([&](double x) { return effective_potential(std::vector<double>{x}, p); }, 0.5, 10.0);
      // golden section resolves a minimum only to ~sqrt(machine eps) relative
      CHECK(std::abs(std::abs(s.x_s[0]) - r) < 1e-6);
    }
  }
  CHECK(stable_nonzero == 2);
}

TEST_CASE("critical pump rates") {
  const auto [e1, e2] = quadratic_critical_pump_rates(quad(0.1));
  // eta1^2 = omega / (8|g|), eta2^2 = eta1^2 + omega Delta^2 / (2|g|)
  CHECK(e1 == doctest::Approx(std::sqrt(0.01 / 1.6)).epsilon(1e-13));
  CHECK(e2 == doctest::Approx(std::sqrt(0.01 / 1.6 + 0.01 * 0.0004 / 0.4)).epsilon(1e-13));
  CHECK(std::floor(e1 * 1e5) == 7905.0);
  CHECK(std::abs(e2 - 0.07912) < 5e-6);
  SystemParams p = quad(0.1);
  p.delta_c = 0.0;
  const auto [f1, f2] = quadratic_critical_pump_rates(p);
  CHECK(f1 == doctest::Approx(f2));
  p.g = {0.2};
  CHECK_THROWS_AS(quadratic_critical_pump_rates(p), DomainError);

  // five extrema between the two thresholds
  const SystemParams w = quad(0.079085);
  const auto ex = bracket_roots([&](double x) { return potential_gradient(std::vector<double>{x}, w)(0); }, -8.0 - 1e-7,
                                8.0, 400000);
  CHECK(ex.size() == 5);
  CHECK(quadratic_steady_states(w).size() == 5);
}

TEST_CASE("sombrero radius") {
  const SystemParams p = quad(0.3, 2);
  const double r = sombrero_radius(p);
  CHECK(r == doctest::Approx(3.0417).epsilon(2e-5));
  const double rmin = golden_minimize([&](double x) { return effective_potential(std::vector<double>{x, 0.0}, p); }, 0.5, 8.0);
  CHECK(std::abs(r - rmin) < 1e-6);
  const double u0 = effective_potential(std::vector<double>{r, 0.0}, p);
  for (int k = 0; k < 24; ++k) {
    const double th = 2.0 * std::numbers::pi * k / 24;
    CHECK(std::abs(effective_potential(std::vector<double>{r * std::cos(th), r * std::sin(th)}, p) - u0) < 1e-10);
  }
  const auto [e1, e2] = quadratic_critical_pump_rates(p);
  (void)e2;
  SystemParams edge = p;
  edge.eta = e1 * (1.0 + 1e-12);
  CHECK(sombrero_radius(edge) == doctest::Approx(std::sqrt(0.02 / 0.2)).epsilon(1e-4));
  edge.eta = 0.5 * e1;
  CHECK_THROWS_AS(sombrero_radius(edge), DomainError);

  // the ring is a degenerate minimum
  bool ring_flagged = false;
  for (const auto& s : quadratic_steady_states(p))
    if (std::abs(std::hypot(s.x_s[0], s.x_s[1]) - r) < 1e-9) ring_flagged = s.degenerate && s.stability == Stability::Stable;
  CHECK(ring_flagged);
}

TEST_CASE("well oscillation frequency") {
  SystemParams p = quad(0.22, 2);
  p.g = {0.2, -0.2};
  CHECK(well_oscillation_frequency(p) == doctest::Approx(0.01 - 0.0001 / (8 * 0.2 * 0.0484)));
  CHECK(well_oscillation_frequency(p) == doctest::Approx(0.008708).epsilon(1e-4));
  p.eta = 1e6;
  CHECK(well_oscillation_frequency(p) == doctest::Approx(0.01));
  for (double eta : {0.08, 0.2, 1.0}) {
    p.eta = eta;
    CHECK(well_oscillation_frequency(p) < p.omega_m);
  }
}

TEST_CASE("stability labels follow the Hessian") {
  for (double eta : {0.1, 0.17, 0.3}) {
    SystemParams p = quad(eta, 2);
    p.g = {-0.2, 0.15};
    for (const auto& s : quadratic_steady_states(p)) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(potential_hessian(s.x_s, p));
      CHECK((es.eigenvalues().minCoeff() > 0) == (s.stability == Stability::Stable));
    }
  }
}

TEST_CASE("adiabatic dynamics conserve energy without damping") {
  SystemParams p = fig1(0.18);
  p.gamma = {0.0};
  const MeanFieldState s0{{3.0}, {0.5}, std::nullopt};
  std::vector<double> times;
  for (int k = 1; k <= 100; ++k) times.push_back(10.0 * k);
  const auto traj = integrate_meanfield(s0, p, times);
  const double e0 = mechanical_energy(s0, p);
  double drift = 0.0;
  for (const auto& s : traj.states) drift = std::max(drift, std::abs(mechanical_energy(s, p) - e0));
  CHECK(drift < 1e-6);
}

TEST_CASE("full and adiabatic mean-field dynamics agree in the fast-cavity limit") {
  SystemParams p;
  p.coupling = Coupling::Linear;
  p.g = {0.01};
  p.gamma = {0.005};
  p.omega_m = 0.01;
  p.delta_c = -0.5;
  p.eta = 0.8;
  const MeanFieldState ad{{1.0}, {0.0}, std::nullopt};
  MeanFieldState full = ad;
  full.alpha = adiabatic_cavity_field(ad.x, p);
  std::vector<double> times;
  for (int k = 0; k <= 990; ++k) times.push_back(10.0 + k);
  const auto a = integrate_meanfield(ad, p, times);
  const auto f = integrate_meanfield(full, p, times);
  double sup = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) sup = std::max(sup, std::abs(a.states[k].x[0] - f.states[k].x[0]));
  CHECK(sup < 1e-3);
}
