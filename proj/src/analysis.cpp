#include "optomech/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "optomech/error.hpp"
#include "optomech/groundstate.hpp"

namespace optomech {

namespace {

/// full_index[k * n_traced + t] for kept multi-index k and traced multi-index t.
std::vector<Index> split_indices(const HilbertSpace& space, const std::vector<int>& keep, const std::vector<int>& traced,
                                 Index& n_keep, Index& n_traced) {
  n_keep = 1;
  for (int m : keep) n_keep *= space.dim(m);
  n_traced = 1;
  for (int m : traced) n_traced *= space.dim(m);
  std::vector<Index> table(static_cast<std::size_t>(n_keep * n_traced));
  std::vector<int> occ(static_cast<std::size_t>(space.modes()));
  for (Index k = 0; k < n_keep; ++k) {
    Index rem = k;
    for (auto it = keep.rbegin(); it != keep.rend(); ++it) {
      occ[static_cast<std::size_t>(*it)] = static_cast<int>(rem % space.dim(*it));
      rem /= space.dim(*it);
    }
    for (Index t = 0; t < n_traced; ++t) {
      Index r = t;
      for (auto it = traced.rbegin(); it != traced.rend(); ++it) {
        occ[static_cast<std::size_t>(*it)] = static_cast<int>(r % space.dim(*it));
        r /= space.dim(*it);
      }
      table[static_cast<std::size_t>(k * n_traced + t)] = space.flat_index(occ);
    }
  }
  return table;
}

}  // namespace

QuantumState partial_trace(const QuantumState& state, std::span<const int> keep) {
  const HilbertSpace& space = state.space();
  if (keep.empty()) throw DomainError("partial trace needs at least one kept mode");
  std::vector<int> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  if (std::adjacent_find(kept.begin(), kept.end()) != kept.end()) throw DomainError("kept modes must be distinct");
  for (int m : kept)
    if (m < 0 || m >= space.modes()) throw DomainError("kept mode " + std::to_string(m) + " out of range");
  std::vector<int> traced;
  for (int m = 0; m < space.modes(); ++m)
    if (!std::binary_search(kept.begin(), kept.end(), m)) traced.push_back(m);

  std::vector<int> kept_dims;
  for (int m : kept) kept_dims.push_back(space.dim(m));
  HilbertSpace reduced(kept_dims);

  Index nk = 0, nt = 0;
  const std::vector<Index> table = split_indices(space, kept, traced, nk, nt);
  CMatrix out = CMatrix::Zero(nk, nk);
  if (state.is_pure()) {
    const CVector& psi = state.vector();
    CMatrix m(nk, nt);
    for (Index k = 0; k < nk; ++k)
      for (Index t = 0; t < nt; ++t) m(k, t) = psi(table[static_cast<std::size_t>(k * nt + t)]);
    out = m * m.adjoint();
  } else {
    const CMatrix& rho = state.matrix();
    for (Index b = 0; b < nk; ++b) {
      for (Index a = 0; a < nk; ++a) {
        cplx acc = 0.0;
        for (Index t = 0; t < nt; ++t)
          acc += rho(table[static_cast<std::size_t>(a * nt + t)], table[static_cast<std::size_t>(b * nt + t)]);
        out(a, b) = acc;
      }
    }
  }
  out = 0.5 * (out + out.adjoint()).eval();
  return QuantumState::density_unchecked(std::move(reduced), std::move(out));
}

cplx expectation(const Operator& op, const CMatrix& rho) {
  if (op.cols() != rho.rows() || op.rows() != rho.cols()) throw ShapeError("operator does not match density matrix");
  // Tr(A rho) = sum_ij A_ij rho_ji
  cplx acc = 0.0;
  for (Index i = 0; i < op.outerSize(); ++i)
    for (Operator::InnerIterator it(op, i); it; ++it) acc += it.value() * rho(it.col(), i);
  return acc;
}

Eigen::VectorXd position_distribution(const CMatrix& rho_m, std::span<const double> x) {
  if (rho_m.rows() != rho_m.cols()) throw ShapeError("density matrix must be square");
  const Eigen::MatrixXd phi = hermite_functions(static_cast<int>(rho_m.rows()) - 1, x);
  const CMatrix prod = phi.cast<cplx>() * rho_m;
  return prod.cwiseProduct(phi.cast<cplx>()).rowwise().sum().real();
}

Eigen::VectorXd position_distribution(const QuantumState& rho_m, std::span<const double> x) {
  if (rho_m.space().modes() != 1) {
    throw ShapeError("position_distribution needs a single-mode state; take a partial trace first");
  }
  return position_distribution(rho_m.density_matrix(), x);
}

double integrate_uniform(const Eigen::VectorXd& values, double dx) { return values.sum() * dx; }

SchmidtDecomposition schmidt_decompose(const QuantumState& psi, double threshold) {
  if (!psi.is_pure()) throw DomainError("Schmidt decomposition needs a pure state");
  if (psi.space().modes() != 2) throw DomainError("Schmidt decomposition needs a two-mode state");
  const int d1 = psi.space().dim(0);
  const int d2 = psi.space().dim(1);
  CMatrix c(d1, d2);
  for (int a = 0; a < d1; ++a)
    for (int b = 0; b < d2; ++b) c(a, b) = psi.vector()(static_cast<Index>(a) * d2 + b);
  Eigen::JacobiSVD<CMatrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SchmidtDecomposition out;
  out.coefficients = svd.singularValues();
  out.basis_1 = svd.matrixU();
  out.basis_2 = svd.matrixV().conjugate();
  out.schmidt_number = static_cast<int>((out.coefficients.array() > threshold).count());
  return out;
}

double von_neumann_entropy(const CMatrix& rho) {
  if (rho.rows() != rho.cols()) throw ShapeError("density matrix must be square");
  const double tr = rho.trace().real();
  if (std::abs(tr - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "entropy of a matrix with trace " << tr;
    throw ContractViolation(msg.str());
  }
  const CMatrix h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam < -1e-8) {
      std::ostringstream msg;
      msg << "density matrix has eigenvalue " << lam << " below -1e-8";
      throw ContractViolation(msg.str());
    }
    if (lam < 1e-14) continue;
    s -= lam * std::log(lam);
  }
  return std::max(s, 0.0);
}

double von_neumann_entropy(const QuantumState& state) {
  if (state.is_pure()) return 0.0;
  return von_neumann_entropy(state.matrix());
}

EntropyReport entropy_report(const QuantumState& rho_12) {
  if (rho_12.space().modes() != 2) throw ShapeError("entropy report needs a two-mode state");
  EntropyReport r;
  const int first[] = {0};
  const int second[] = {1};
  r.s1 = von_neumann_entropy(partial_trace(rho_12, first));
  r.s2 = von_neumann_entropy(partial_trace(rho_12, second));
  r.joint = von_neumann_entropy(rho_12);
  r.mutual_information = r.s1 + r.s2 - r.joint;
  return r;
}

double mutual_information(const QuantumState& rho_12) { return entropy_report(rho_12).mutual_information; }

Operator angular_momentum_operator(const HilbertSpace& space, int mode_i, int mode_j) {
  if (mode_i == mode_j) throw DomainError("angular momentum needs two distinct modes");
  const Operator xi = embed(position_op(space.dim(mode_i)), mode_i, space);
  const Operator pi = embed(momentum_op(space.dim(mode_i)), mode_i, space);
  const Operator xj = embed(position_op(space.dim(mode_j)), mode_j, space);
  const Operator pj = embed(momentum_op(space.dim(mode_j)), mode_j, space);
  Operator l = Operator(xi * pj) - Operator(xj * pi);
  l.prune(cplx(0.0), 0.0);
  return l;
}

ObservableSeries expectation_series(const Trajectory& traj, const Operator& op, std::string name) {
  if (traj.states.size() != traj.times.size()) throw DomainError("trajectory holds no stored states");
  ObservableSeries s;
  s.name = std::move(name);
  s.times = traj.times;
  for (const auto& rho : traj.states) s.values.push_back(expectation(op, rho).real());
  return s;
}

ObservableSeries angular_momentum_series(const Trajectory& traj, const HilbertSpace& space, int mode_i, int mode_j) {
  return expectation_series(traj, angular_momentum_operator(space, mode_i, mode_j), "L_phi");
}

}  // namespace optomech
