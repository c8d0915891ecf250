#pragma once

// Truncated Fock-space operator algebra.
//
// Mode ordering convention used everywhere in the library: the cavity is
// mode 0 and mechanical modes follow (1..N). Basis states are indexed
// row-major with the LAST mode varying fastest, i.e. the index of
// |n_0, n_1, ..., n_M> is sum_k n_k * stride(k) with stride(M) = 1.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace optomech {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

/// Sparse complex operator (row-major so rows can be walked by the kernels).
using Operator = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

class HilbertSpace {
 public:
  explicit HilbertSpace(std::vector<int> dims);

  int modes() const noexcept { return static_cast<int>(dims_.size()); }
  int dim(int mode) const;
  std::span<const int> dims() const noexcept { return dims_; }
  Index total() const noexcept { return total_; }
  Index stride(int mode) const;

  /// Fock occupations of a flat basis index.
  std::vector<int> occupations(Index flat) const;
  Index flat_index(std::span<const int> occupations) const;

  bool operator==(const HilbertSpace& other) const noexcept { return dims_ == other.dims_; }

 private:
  std::vector<int> dims_;
  Index total_ = 1;
};

Operator identity_op(Index dim);
Operator annihilation_op(int dim);
Operator creation_op(int dim);
Operator number_op(int dim);
/// x = (b + b^dag)/sqrt(2), dimensionless.
Operator position_op(int dim);
/// p = -i (b - b^dag)/sqrt(2), dimensionless.
Operator momentum_op(int dim);

/// Lifts a single-mode operator to I (x) ... (x) op (x) ... (x) I.
Operator embed(const Operator& op, int mode, const HilbertSpace& space);

/// Commutator AB - BA.
Operator commutator(const Operator& a, const Operator& b);

/// Pure vector or density matrix on a HilbertSpace.
///
/// Construction validates the payload: pure vectors must have unit norm
/// (1e-12), density matrices must be Hermitian (1e-12) with unit trace (1e-10).
class QuantumState {
 public:
  static QuantumState pure(HilbertSpace space, CVector psi);
  static QuantumState density(HilbertSpace space, CMatrix rho);
  /// Skips validation; for trusted internal producers (integrator output is
  /// checked separately against looser drift tolerances).
  static QuantumState density_unchecked(HilbertSpace space, CMatrix rho);

  const HilbertSpace& space() const noexcept { return space_; }
  bool is_pure() const noexcept { return std::holds_alternative<CVector>(payload_); }
  const CVector& vector() const;
  const CMatrix& matrix() const;
  /// Density matrix view (|psi><psi| for pure states).
  CMatrix density_matrix() const;

 private:
  QuantumState(HilbertSpace space, std::variant<CVector, CMatrix> payload)
      : space_(std::move(space)), payload_(std::move(payload)) {}

  HilbertSpace space_;
  std::variant<CVector, CMatrix> payload_;
};

/// Smallest truncation for which a coherent amplitude beta is considered adequate.
double coherent_truncation_floor(cplx beta);

/// Renormalized coherent amplitudes e^{-|b|^2/2} b^n / sqrt(n!) for n < dim.
CVector coherent_amplitudes(int dim, cplx beta);

/// Coherent state on a single mode; warns when dim is below the adequacy floor.
QuantumState coherent_state(int dim, cplx beta);

QuantumState fock_state(const HilbertSpace& space, std::span<const int> occupations);

/// Tensor product of single-mode states, in mode order. Pure if all inputs are.
QuantumState product_state(std::span<const QuantumState> factors);

/// Hermiticity defect max |A - A^dag|.
double hermiticity_defect(const CMatrix& a);

}  // namespace optomech
