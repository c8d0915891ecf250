#include "optomech/hilbert.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "optomech/error.hpp"

namespace optomech {

namespace {

void require_dim(int dim) {
  if (dim < 2) {
    throw InvalidDimension("mode dimension must be >= 2, got " + std::to_string(dim));
  }
}

Operator from_triplets(Index rows, Index cols, const std::vector<Eigen::Triplet<cplx>>& t) {
  Operator m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace

HilbertSpace::HilbertSpace(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw InvalidDimension("Hilbert space needs at least one mode");
  constexpr Index limit = std::numeric_limits<int>::max();
  for (int d : dims_) {
    require_dim(d);
    if (total_ > limit / d) throw InvalidDimension("total Hilbert dimension overflows the index type");
    total_ *= d;
  }
}

int HilbertSpace::dim(int mode) const {
  if (mode < 0 || mode >= modes()) throw ShapeError("mode index " + std::to_string(mode) + " out of range");
  return dims_[static_cast<std::size_t>(mode)];
}

Index HilbertSpace::stride(int mode) const {
  if (mode < 0 || mode >= modes()) throw ShapeError("mode index " + std::to_string(mode) + " out of range");
  Index s = 1;
  for (int k = modes() - 1; k > mode; --k) s *= dims_[static_cast<std::size_t>(k)];
  return s;
}

std::vector<int> HilbertSpace::occupations(Index flat) const {
  std::vector<int> occ(dims_.size());
  for (int k = modes() - 1; k >= 0; --k) {
    const int d = dims_[static_cast<std::size_t>(k)];
    occ[static_cast<std::size_t>(k)] = static_cast<int>(flat % d);
    flat /= d;
  }
  return occ;
}

Index HilbertSpace::flat_index(std::span<const int> occ) const {
  if (occ.size() != dims_.size()) throw ShapeError("occupation list does not match mode count");
  Index flat = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (occ[k] < 0 || occ[k] >= dims_[k]) throw ShapeError("occupation outside truncation");
    flat = flat * dims_[k] + occ[k];
  }
  return flat;
}

Operator identity_op(Index dim) {
  Operator id(dim, dim);
  id.setIdentity();
  return id;
}

Operator annihilation_op(int dim) {
  require_dim(dim);
  std::vector<Eigen::Triplet<cplx>> t;
  for (int n = 1; n < dim; ++n) t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  return from_triplets(dim, dim, t);
}

Operator creation_op(int dim) { return Operator(annihilation_op(dim).adjoint()); }

Operator number_op(int dim) {
  require_dim(dim);
  std::vector<Eigen::Triplet<cplx>> t;
  for (int n = 1; n < dim; ++n) t.emplace_back(n, n, static_cast<double>(n));
  return from_triplets(dim, dim, t);
}

Operator position_op(int dim) {
  const Operator a = annihilation_op(dim);
  return Operator((a + Operator(a.adjoint())) * (1.0 / std::sqrt(2.0)));
}

Operator momentum_op(int dim) {
  const Operator a = annihilation_op(dim);
  return Operator((a - Operator(a.adjoint())) * cplx(0.0, -1.0 / std::sqrt(2.0)));
}

Operator embed(const Operator& op, int mode, const HilbertSpace& space) {
  const int d = space.dim(mode);
  if (op.rows() != d || op.cols() != d) {
    std::ostringstream msg;
    msg << "cannot embed " << op.rows() << "x" << op.cols() << " operator into mode " << mode << " of dimension " << d;
    throw ShapeError(msg.str());
  }
  const Index right = space.stride(mode);
  const Index left = space.total() / (right * d);
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<std::size_t>(op.nonZeros() * left * right));
  for (Index l = 0; l < left; ++l) {
    for (Index r = 0; r < op.outerSize(); ++r) {
      for (Operator::InnerIterator it(op, r); it; ++it) {
        const Index row0 = (l * d + it.row()) * right;
        const Index col0 = (l * d + it.col()) * right;
        for (Index k = 0; k < right; ++k) t.emplace_back(row0 + k, col0 + k, it.value());
      }
    }
  }
  return from_triplets(space.total(), space.total(), t);
}

Operator commutator(const Operator& a, const Operator& b) {
  Operator c = Operator(a * b) - Operator(b * a);
  c.prune(cplx(0.0), 0.0);
  return c;
}

QuantumState QuantumState::pure(HilbertSpace space, CVector psi) {
  if (psi.size() != space.total()) throw ShapeError("state vector length does not match Hilbert space");
  if (!psi.allFinite()) throw ContractViolation("state vector has non-finite entries");
  const double norm = psi.norm();
  if (std::abs(norm - 1.0) > 1e-12) {
    throw ContractViolation("pure state is not normalized (|psi| = " + std::to_string(norm) + ")");
  }
  return QuantumState(std::move(space), std::move(psi));
}

QuantumState QuantumState::density(HilbertSpace space, CMatrix rho) {
  if (rho.rows() != space.total() || rho.cols() != space.total()) {
    throw ShapeError("density matrix shape does not match Hilbert space");
  }
  if (!rho.allFinite()) throw ContractViolation("density matrix has non-finite entries");
  if (hermiticity_defect(rho) > 1e-12) throw ContractViolation("density matrix is not Hermitian");
  const double tr = rho.trace().real();
  if (std::abs(tr - 1.0) > 1e-10) {
    throw ContractViolation("density matrix trace is " + std::to_string(tr));
  }
  return QuantumState(std::move(space), std::move(rho));
}

QuantumState QuantumState::density_unchecked(HilbertSpace space, CMatrix rho) {
  if (rho.rows() != space.total() || rho.cols() != space.total()) {
    throw ShapeError("density matrix shape does not match Hilbert space");
  }
  return QuantumState(std::move(space), std::move(rho));
}

const CVector& QuantumState::vector() const {
  if (!is_pure()) throw DomainError("state is mixed; no state vector available");
  return std::get<CVector>(payload_);
}

const CMatrix& QuantumState::matrix() const {
  if (is_pure()) throw DomainError("state is pure; use density_matrix()");
  return std::get<CMatrix>(payload_);
}

CMatrix QuantumState::density_matrix() const {
  if (is_pure()) {
    const CVector& psi = std::get<CVector>(payload_);
    return psi * psi.adjoint();
  }
  return std::get<CMatrix>(payload_);
}

double coherent_truncation_floor(cplx beta) {
  const double r = std::abs(beta);
  return r * r + 5.0 * r + 5.0;
}

CVector coherent_amplitudes(int dim, cplx beta) {
  require_dim(dim);
  CVector c(dim);
  const double r = std::abs(beta);
  const double phase = std::arg(beta);
  if (r == 0.0) {
    c.setZero();
    c(0) = 1.0;
    return c;
  }
  // log|c_n| = -r^2/2 + n ln r - ln(n!)/2, accumulated term by term.
  const double log_r = std::log(r);
  double log_mag = -0.5 * r * r;
  for (int n = 0; n < dim; ++n) {
    if (n > 0) log_mag += log_r - 0.5 * std::log(static_cast<double>(n));
    c(n) = std::polar(std::exp(log_mag), n * phase);
  }
  c /= c.norm();
  return c;
}

QuantumState coherent_state(int dim, cplx beta) {
  if (dim < coherent_truncation_floor(beta)) {
    std::ostringstream msg;
    msg << "coherent state |beta|=" << std::abs(beta) << " in dimension " << dim << " is below the adequacy floor "
        << coherent_truncation_floor(beta);
    warn(msg.str());
  }
  return QuantumState::pure(HilbertSpace({dim}), coherent_amplitudes(dim, beta));
}

QuantumState fock_state(const HilbertSpace& space, std::span<const int> occupations) {
  CVector psi = CVector::Zero(space.total());
  psi(space.flat_index(occupations)) = 1.0;
  return QuantumState::pure(space, std::move(psi));
}

QuantumState product_state(std::span<const QuantumState> factors) {
  if (factors.empty()) throw ShapeError("product of zero states");
  std::vector<int> dims;
  bool all_pure = true;
  for (const auto& f : factors) {
    for (int d : f.space().dims()) dims.push_back(d);
    all_pure = all_pure && f.is_pure();
  }
  HilbertSpace space(std::move(dims));
  if (all_pure) {
    CVector psi = factors[0].vector();
    for (std::size_t k = 1; k < factors.size(); ++k) {
      const CVector& next = factors[k].vector();
      CVector out(psi.size() * next.size());
      for (Index i = 0; i < psi.size(); ++i) out.segment(i * next.size(), next.size()) = psi(i) * next;
      psi = std::move(out);
    }
    psi /= psi.norm();
    return QuantumState::pure(std::move(space), std::move(psi));
  }
  CMatrix rho = factors[0].density_matrix();
  for (std::size_t k = 1; k < factors.size(); ++k) {
    const CMatrix next = factors[k].density_matrix();
    const Index n = next.rows();
    CMatrix out(rho.rows() * n, rho.cols() * n);
    for (Index i = 0; i < rho.rows(); ++i)
      for (Index j = 0; j < rho.cols(); ++j) out.block(i * n, j * n, n, n) = rho(i, j) * next;
    rho = std::move(out);
  }
  rho /= rho.trace().real();
  return QuantumState::density(std::move(space), std::move(rho));
}

double hermiticity_defect(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace optomech
