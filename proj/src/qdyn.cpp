#include "optomech/qdyn.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include <cmath>
#include <sstream>

#include "optomech/error.hpp"

namespace optomech {

namespace {

using ColSparse = Eigen::SparseMatrix<cplx>;

double min_eigenvalue(const CMatrix& rho) {
  const CMatrix h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double trace_norm(const CMatrix& m) {
  const CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

// Replaces a column-major d x d matrix by its Hermitian part, written so that
// mirrored entries are exact conjugates. Real linear combinations then stay
// exactly Hermitian, so the integrator cannot accumulate a defect.
void hermitize(cplx* m, Index d) {
  for (Index j = 0; j < d; ++j) {
    m[j * d + j] = cplx(m[j * d + j].real(), 0.0);
    for (Index i = j + 1; i < d; ++i) {
      const cplx h = 0.5 * (m[j * d + i] + std::conj(m[i * d + j]));
      m[j * d + i] = h;
      m[i * d + j] = std::conj(h);
    }
  }
}

void check_decay(const LindbladGenerator& gen) {
  const HilbertSpace& space = gen.space();
  std::vector<bool> damped(static_cast<std::size_t>(space.modes()), false);
  for (const auto& d : gen.dissipators()) {
    if (!(d.rate > 0.0)) continue;
    // A dissipator touches mode m when it acts non-trivially on its index digit.
    for (int m = 0; m < space.modes(); ++m) {
      const Index stride = space.stride(m);
      const int dm = space.dim(m);
      for (Index r = 0; r < d.op.outerSize() && !damped[static_cast<std::size_t>(m)]; ++r) {
        for (Operator::InnerIterator it(d.op, r); it; ++it) {
          if (it.value() == cplx(0.0)) continue;
          if ((it.row() / stride) % dm != (it.col() / stride) % dm) {
            damped[static_cast<std::size_t>(m)] = true;
            break;
          }
        }
      }
    }
  }
  for (std::size_t m = 0; m < damped.size(); ++m) {
    if (!damped[m]) {
      throw ContractViolation("steady state requires a positive decay rate on every mode; mode " + std::to_string(m) +
                              " is undamped");
    }
  }
}

/// Superoperator with its first row replaced by the trace functional.
ColSparse constrained_superoperator(const LindbladGenerator& gen) {
  const Index d = gen.dim();
  ColSparse l = superoperator(gen);
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<std::size_t>(l.nonZeros() + d));
  for (Index k = 0; k < l.outerSize(); ++k)
    for (ColSparse::InnerIterator it(l, k); it; ++it)
      if (it.row() != 0) t.emplace_back(it.row(), it.col(), it.value());
  for (Index i = 0; i < d; ++i) t.emplace_back(0, i * d + i, cplx(1.0));
  ColSparse a(d * d, d * d);
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  return a;
}

CMatrix to_density(const CVector& v, Index d) {
  CMatrix rho = Eigen::Map<const CMatrix>(v.data(), d, d);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return rho;
}

CMatrix vacuum_matrix(Index d) {
  CMatrix rho = CMatrix::Zero(d, d);
  rho(0, 0) = 1.0;
  return rho;
}

/// Closest density matrix in Frobenius norm: Hermitian part with negative
/// eigenvalues clipped, renormalized.
CMatrix nearest_density(const CMatrix& m) {
  const CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  CMatrix rho = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return rho / rho.trace().real();
}

SteadyStateResult march(const LindbladGenerator& gen, CMatrix rho, const SteadyStateOptions& opt) {
  SteadyStateResult res;
  res.method = SteadyStateMethod::TimeMarching;
  res.residual = liouvillian_residual(gen, rho);
  double elapsed = 0.0;
  double horizon = 10.0;
  EvolveOptions eo;
  eo.ode = opt.ode;
  eo.storage = StoragePolicy::Snapshots;
  eo.positivity_stride = 0;
  while (res.residual >= opt.tolerance) {
    if (elapsed >= opt.max_time) {
      std::ostringstream msg;
      msg << "steady state not reached after kappa t = " << elapsed << "; residual " << res.residual;
      throw ConvergenceError(msg.str(), res.residual);
    }
    const double span = std::min(horizon, opt.max_time - elapsed);
    const std::vector<double> t = {span};
    Trajectory tr = evolve(QuantumState::density_unchecked(gen.space(), rho), gen, t, eo);
    rho = std::move(tr.states.back());
    elapsed += span;
    horizon *= 2.0;
    ++res.iterations;
    res.residual = liouvillian_residual(gen, rho);
  }
  res.marched_time = elapsed;
  res.rho = std::move(rho);
  return res;
}

}  // namespace

Trajectory evolve(const QuantumState& rho0, const LindbladGenerator& gen, std::span<const double> times,
                  const EvolveOptions& options) {
  if (!(rho0.space() == gen.space())) throw ShapeError("initial state does not live on the generator's space");
  if (!times.empty() && times.front() < 0.0) throw DomainError("sample times must start at t >= 0");
  const Index d = gen.dim();
  const auto n = static_cast<std::size_t>(d * d);

  CVector y(static_cast<Index>(n));
  {
    const CMatrix rho = rho0.density_matrix();
    std::copy(rho.data(), rho.data() + n, y.data());
    hermitize(y.data(), d);
  }
  CVector scratch(static_cast<Index>(n));
  const auto& kernel = gen.kernel();
  const kernels::Exec exec = options.ode.exec;

  Trajectory traj;
  const InvariantTolerances& tol = options.tolerances;
  std::size_t sample = 0;

  auto rhs = [&](double, const CVector& v, CVector& dv) {
    kernels::lindblad_apply(kernel, v.data(), dv.data(), scratch.data(), exec);
    hermitize(dv.data(), d);
  };
  auto obs = [&](double t, const CVector& v) {
    Eigen::Map<const CMatrix> rho(v.data(), d, d);
    const double tr_err = std::abs(rho.trace() - cplx(1.0));
    const double herm = hermiticity_defect(rho);
    double lam = 0.0;
    if (options.positivity_stride > 0 && sample % static_cast<std::size_t>(options.positivity_stride) == 0) {
      lam = std::min(0.0, min_eigenvalue(rho));
    }
    ++sample;
    InvariantDrift& dr = traj.drift;
    dr.trace = std::max(dr.trace, tr_err);
    dr.hermiticity = std::max(dr.hermiticity, herm);
    dr.min_eigenvalue = std::min(dr.min_eigenvalue, lam);
    if (tr_err > tol.trace || herm > tol.hermiticity || lam < tol.min_eigenvalue) dr.within_tolerance = false;
    const double f = tol.failure_factor;
    if (!std::isfinite(tr_err) || tr_err > f * tol.trace || herm > f * tol.hermiticity ||
        lam < f * tol.min_eigenvalue) {
      std::ostringstream msg;
      msg << "invariant breach at kappa t = " << t << ": |Tr rho - 1| = " << tr_err << ", hermiticity defect = " << herm
          << ", min eigenvalue = " << lam << "; try tighter tolerances, a smaller fixed step, or a larger truncation";
      throw IntegrationFailure(msg.str());
    }
    traj.times.push_back(t);
    if (options.observer || options.storage == StoragePolicy::Snapshots) {
      const CMatrix copy = rho;
      if (options.observer) options.observer(t, copy);
      if (options.storage == StoragePolicy::Snapshots) traj.states.push_back(copy);
    }
  };
  traj.stats = ode::integrate<cplx>(rhs, y, 0.0, times, options.ode, obs);
  return traj;
}

double liouvillian_residual(const LindbladGenerator& gen, const CMatrix& rho) {
  if (rho.rows() != gen.dim() || rho.cols() != gen.dim()) throw ShapeError("density matrix does not match generator");
  CMatrix out, scratch;
  gen.apply(rho, out, scratch, kernels::Exec::Parallel);
  return trace_norm(out);
}

std::string_view to_string(SteadyStateMethod m) {
  switch (m) {
    case SteadyStateMethod::Krylov:
      return "krylov";
    case SteadyStateMethod::TimeMarching:
      return "time-marching";
    case SteadyStateMethod::Direct:
      return "direct";
  }
  return "krylov";
}

SteadyStateMethod steady_state_method_from_string(std::string_view s) {
  if (s == "krylov") return SteadyStateMethod::Krylov;
  if (s == "time-marching") return SteadyStateMethod::TimeMarching;
  if (s == "direct") return SteadyStateMethod::Direct;
  throw ValidationError("method", "expected 'krylov', 'time-marching' or 'direct', got '" + std::string(s) + "'");
}

SteadyStateResult steady_state(const LindbladGenerator& gen, const std::optional<CMatrix>& guess,
                               const SteadyStateOptions& options) {
  check_decay(gen);
  const Index d = gen.dim();
  if (guess && (guess->rows() != d || guess->cols() != d)) throw ShapeError("steady-state guess has the wrong shape");
  const CMatrix start = guess ? *guess : vacuum_matrix(d);

  if (options.method == SteadyStateMethod::TimeMarching) return march(gen, start, options);

  if (options.method == SteadyStateMethod::Direct && d > 200) {
    throw DomainError("direct steady-state solve is limited to dimension 200 (got " + std::to_string(d) + ")");
  }
  const ColSparse a = constrained_superoperator(gen);
  CVector b = CVector::Zero(d * d);
  b(0) = 1.0;

  SteadyStateResult res;
  res.method = options.method;
  CVector x;
  if (options.method == SteadyStateMethod::Direct) {
    Eigen::SparseLU<ColSparse> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw ConvergenceError("sparse LU factorization failed", INFINITY);
    x = lu.solve(b);
  } else {
    Eigen::GMRES<ColSparse, Eigen::IncompleteLUT<cplx>> solver;
    solver.preconditioner().setDroptol(options.ilu_droptol);
    solver.preconditioner().setFillfactor(options.ilu_fill);
    solver.set_restart(options.gmres_restart);
    solver.setMaxIterations(options.gmres_max_iterations);
    solver.setTolerance(options.gmres_tolerance);
    solver.compute(a);
    if (solver.info() != Eigen::Success) throw ConvergenceError("incomplete LU factorization failed", INFINITY);
    const CVector x0 = Eigen::Map<const CVector>(start.data(), d * d);
    x = solver.solveWithGuess(b, x0);
    res.iterations = static_cast<int>(solver.iterations());
  }
  res.rho = to_density(x, d);
  res.residual = liouvillian_residual(gen, res.rho);
  if (res.residual < options.tolerance) return res;

  if (options.method == SteadyStateMethod::Krylov && options.allow_fallback) {
    std::ostringstream msg;
    msg << "Krylov steady state residual " << res.residual << " above " << options.tolerance
        << "; continuing by time marching";
    warn(msg.str());
    SteadyStateResult marched = march(gen, nearest_density(res.rho), options);
    marched.iterations += res.iterations;
    return marched;
  }
  std::ostringstream msg;
  msg << "steady state residual " << res.residual << " above tolerance " << options.tolerance;
  throw ConvergenceError(msg.str(), res.residual);
}

double cat_norm_squared(double beta0, double phi0) {
  return 2.0 * (1.0 + std::cos(phi0) * std::exp(-2.0 * beta0 * beta0));
}

QuantumState prepare_cat_state(double beta0, double phi0, int dim) {
  const cplx beta(beta0, 0.0);
  if (dim < coherent_truncation_floor(beta)) {
    warn("cat state truncation " + std::to_string(dim) + " is below the adequacy floor for beta0 = " +
         std::to_string(beta0));
  }
  const CVector plus = coherent_amplitudes(dim, beta);
  const CVector minus = coherent_amplitudes(dim, -beta);
  CVector psi = plus + std::polar(1.0, phi0) * minus;
  const double norm = psi.norm();
  if (!(norm > 1e-300)) throw DomainError("cat state with phi0 = pi and beta0 = 0 is the null vector");
  psi /= norm;
  return QuantumState::pure(HilbertSpace({dim}), std::move(psi));
}

QuantumState cavity_vacuum_product(int cavity_dim, std::span<const QuantumState> mechanics) {
  std::vector<QuantumState> factors;
  CVector vac = CVector::Zero(cavity_dim);
  vac(0) = 1.0;
  factors.push_back(QuantumState::pure(HilbertSpace({cavity_dim}), std::move(vac)));
  for (const auto& m : mechanics) factors.push_back(m);
  return product_state(factors);
}

QuantumState vacuum_state(const HilbertSpace& space) {
  return QuantumState::density(space, vacuum_matrix(space.total()));
}

}  // namespace optomech
