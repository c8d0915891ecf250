#pragma once

// Explicit Runge-Kutta integration shared by the mean-field and master-equation
// solvers: adaptive Dormand-Prince 5(4) with FSAL and PI step control, or
// classical RK4 on a fixed grid for reproducible runs. Steps are shortened to
// land exactly on every requested output time.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "optomech/error.hpp"
#include "optomech/kernels.hpp"

namespace optomech::ode {

struct Options {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h_init = 0.0;  // 0: automatic
  double h_max = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 100'000'000;
  std::optional<double> fixed_step;
  kernels::Exec exec = kernels::Exec::Parallel;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
  double last_step = 0.0;
};

namespace detail {

template <class Scalar>
double scaled_rms(const Scalar* err, const Scalar* y0, const Scalar* y1, std::size_t n, double atol, double rtol,
                  kernels::Exec exec) {
  double acc = 0.0;
  const bool par = exec == kernels::Exec::Parallel && n >= (1u << 14);
#pragma omp parallel for schedule(static) reduction(+ : acc) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    const double sk = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = std::abs(err[i]) / sk;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(std::max<std::size_t>(n, 1)));
}

template <class Scalar>
void combine(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& out, std::vector<const Scalar*> xs, std::vector<double> coeffs,
             kernels::Exec exec) {
  kernels::linear_combination<Scalar>(out.data(), static_cast<std::size_t>(out.size()), xs, coeffs, false, exec);
}

inline void check_times(double t0, std::span<const double> times) {
  double prev = t0;
  for (double t : times) {
    if (!(t >= prev)) throw DomainError("output times must be non-decreasing and start at or after t0");
    prev = t;
  }
}

}  // namespace detail

/// Integrates y' = f(t, y) from t0 through every time in `times`, calling
/// obs(t, y) at each of them. `rhs(t, y, dydt)` must not resize dydt.
template <class Scalar, class Rhs, class Observer>
Stats integrate(Rhs&& rhs, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y, double t0, std::span<const double> times,
                const Options& opt, Observer&& obs) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  detail::check_times(t0, times);
  const std::size_t n = static_cast<std::size_t>(y.size());
  const auto exec = opt.exec;
  Stats stats;
  double t = t0;

  if (opt.fixed_step) {
    const double dt = *opt.fixed_step;
    if (!(dt > 0.0)) throw DomainError("fixed step must be > 0");
    Vec k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (double t_out : times) {
      const double span = t_out - t;
      const auto steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-12));
      const double h = steps > 0 ? span / static_cast<double>(steps) : 0.0;
      for (std::size_t s = 0; s < steps; ++s) {
        rhs(t, y, k1);
        detail::combine<Scalar>(tmp, {y.data(), k1.data()}, {1.0, 0.5 * h}, exec);
        rhs(t + 0.5 * h, tmp, k2);
        detail::combine<Scalar>(tmp, {y.data(), k2.data()}, {1.0, 0.5 * h}, exec);
        rhs(t + 0.5 * h, tmp, k3);
        detail::combine<Scalar>(tmp, {y.data(), k3.data()}, {1.0, h}, exec);
        rhs(t + h, tmp, k4);
        kernels::linear_combination<Scalar>(y.data(), n, {k1.data(), k2.data(), k3.data(), k4.data()},
                                            {h / 6.0, h / 3.0, h / 3.0, h / 6.0}, true, exec);
        t = (s + 1 == steps) ? t_out : t + h;
        stats.rhs_evals += 4;
        ++stats.accepted;
      }
      stats.last_step = h;
      t = t_out;
      obs(t, static_cast<const Vec&>(y));
    }
    return stats;
  }

  // Dormand-Prince 5(4)
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
  rhs(t, y, k1);
  stats.rhs_evals = 1;

  double h = opt.h_init;
  if (!(h > 0.0)) {
    // Hairer's starting-step heuristic.
    const double d0 = detail::scaled_rms<Scalar>(y.data(), y.data(), y.data(), n, opt.atol, opt.rtol, exec);
    const double d1 = detail::scaled_rms<Scalar>(k1.data(), y.data(), y.data(), n, opt.atol, opt.rtol, exec);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    detail::combine<Scalar>(ytmp, {y.data(), k1.data()}, {1.0, h0}, exec);
    rhs(t + h0, ytmp, k2);
    ++stats.rhs_evals;
    detail::combine<Scalar>(k3, {k2.data(), k1.data()}, {1.0, -1.0}, exec);
    const double d2 = detail::scaled_rms<Scalar>(k3.data(), y.data(), y.data(), n, opt.atol, opt.rtol, exec) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min(h, opt.h_max);

  constexpr double beta = 0.04;
  constexpr double expo1 = 0.2 - beta * 0.75;
  double facold = 1e-4;
  std::size_t steps = 0;

  for (double t_out : times) {
    while (t < t_out) {
      if (++steps > opt.max_steps) throw IntegrationFailure("step budget exhausted before t = " + std::to_string(t_out));
      double h_try = std::min(h, opt.h_max);
      bool clamped = false;
      if (t + h_try >= t_out || t_out - (t + h_try) < 1e-12 * std::max(1.0, std::abs(t_out))) {
        h_try = t_out - t;
        clamped = true;
      }
      if (h_try < 1e-13 * std::max(1.0, std::abs(t))) {
        std::ostringstream msg;
        msg << "step size underflow at t = " << t << " (h = " << h_try << "); reduce stiffness or tolerances";
        throw IntegrationFailure(msg.str());
      }
      const double hh = h_try;
      detail::combine<Scalar>(ytmp, {y.data(), k1.data()}, {1.0, hh * a21}, exec);
      rhs(t + c2 * hh, ytmp, k2);
      detail::combine<Scalar>(ytmp, {y.data(), k1.data(), k2.data()}, {1.0, hh * a31, hh * a32}, exec);
      rhs(t + c3 * hh, ytmp, k3);
      detail::combine<Scalar>(ytmp, {y.data(), k1.data(), k2.data(), k3.data()}, {1.0, hh * a41, hh * a42, hh * a43},
                              exec);
      rhs(t + c4 * hh, ytmp, k4);
      detail::combine<Scalar>(ytmp, {y.data(), k1.data(), k2.data(), k3.data(), k4.data()},
                              {1.0, hh * a51, hh * a52, hh * a53, hh * a54}, exec);
      rhs(t + c5 * hh, ytmp, k5);
      detail::combine<Scalar>(ytmp, {y.data(), k1.data(), k2.data(), k3.data(), k4.data(), k5.data()},
                              {1.0, hh * a61, hh * a62, hh * a63, hh * a64, hh * a65}, exec);
      rhs(t + hh, ytmp, k6);
      detail::combine<Scalar>(ynew, {y.data(), k1.data(), k3.data(), k4.data(), k5.data(), k6.data()},
                              {1.0, hh * a71, hh * a73, hh * a74, hh * a75, hh * a76}, exec);
      rhs(t + hh, ynew, k7);
      stats.rhs_evals += 6;
      // error estimate into ytmp
      detail::combine<Scalar>(ytmp, {k1.data(), k3.data(), k4.data(), k5.data(), k6.data(), k7.data()},
                              {hh * e1, hh * e3, hh * e4, hh * e5, hh * e6, hh * e7}, exec);
      double err = detail::scaled_rms<Scalar>(ytmp.data(), y.data(), ynew.data(), n, opt.atol, opt.rtol, exec);
      if (!std::isfinite(err)) err = 1e10;

      const double fac11 = std::pow(std::max(err, 1e-300), expo1);
      double fac = fac11 / std::pow(facold, beta);
      fac = std::clamp(fac / 0.9, 0.2, 10.0);
      const double h_new = hh / fac;

      if (err <= 1.0) {
        facold = std::max(err, 1e-4);
        t = clamped ? t_out : t + hh;
        y.swap(ynew);
        k1.swap(k7);
        ++stats.accepted;
        stats.last_step = hh;
        // A step shortened to hit an output time should not shrink the next one.
        h = clamped ? std::max(h, h_new) : h_new;
      } else {
        ++stats.rejected;
        h = hh / std::min(1.0 / 0.2, fac11 / 0.9);
      }
    }
    obs(t, static_cast<const Vec&>(y));
  }
  return stats;
}

}  // namespace optomech::ode
