#include "optomech/model.hpp"

#include <cmath>
#include <string>

#include "optomech/error.hpp"

namespace optomech {

std::string_view to_string(Coupling c) { return c == Coupling::Linear ? "linear" : "quadratic"; }

Coupling coupling_from_string(std::string_view s) {
  if (s == "linear" || s == "Linear") return Coupling::Linear;
  if (s == "quadratic" || s == "Quadratic") return Coupling::Quadratic;
  throw ValidationError("coupling", "expected 'linear' or 'quadratic', got '" + std::string(s) + "'");
}

void SystemParams::validate() const {
  if (g.empty()) throw ValidationError("params.g", "at least one mechanical mode is required");
  if (gamma.size() != g.size()) {
    throw ValidationError("params.gamma", "length " + std::to_string(gamma.size()) + " does not match g length " +
                                              std::to_string(g.size()));
  }
  if (!(omega_m > 0.0) || !std::isfinite(omega_m)) throw ValidationError("params.omega_m", "must be > 0");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ValidationError("params.eta", "must be >= 0");
  if (!std::isfinite(delta_c)) throw ValidationError("params.delta_c", "must be finite");
  for (double v : g)
    if (!std::isfinite(v)) throw ValidationError("params.g", "must be finite");
  for (double v : gamma)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("params.gamma", "rates must be >= 0");
}

Operator build_hamiltonian(const SystemParams& params, const HilbertSpace& space) {
  params.validate();
  if (space.modes() != 1 + params.n_mech()) {
    throw ShapeError("Hilbert space has " + std::to_string(space.modes()) + " modes but the model needs " +
                     std::to_string(1 + params.n_mech()));
  }
  const Operator a = embed(annihilation_op(space.dim(0)), 0, space);
  const Operator ad = Operator(a.adjoint());
  const Operator na = ad * a;

  Operator h = -params.delta_c * na + cplx(0.0, params.eta) * (ad - a);
  Operator coupling(space.total(), space.total());
  for (int k = 0; k < params.n_mech(); ++k) {
    const int mode = k + 1;
    const int d = space.dim(mode);
    // (p^2 + x^2)/2 = b^dag b + 1/2 exactly, also within the truncation.
    h += params.omega_m * (embed(number_op(d), mode, space) + 0.5 * identity_op(space.total()));
    const Operator x = position_op(d);
    if (params.coupling == Coupling::Linear) {
      coupling -= params.g[static_cast<std::size_t>(k)] * embed(x, mode, space);
    } else {
      coupling += params.g[static_cast<std::size_t>(k)] * embed(Operator(x * x), mode, space);
    }
  }
  h += Operator(na * coupling);
  h.prune(cplx(0.0), 0.0);
  h.makeCompressed();
  return h;
}

LindbladGenerator::LindbladGenerator(HilbertSpace space, Operator hamiltonian, std::vector<Dissipator> dissipators)
    : space_(std::move(space)), hamiltonian_(std::move(hamiltonian)), dissipators_(std::move(dissipators)) {
  if (hamiltonian_.rows() != space_.total() || hamiltonian_.cols() != space_.total()) {
    throw ShapeError("Hamiltonian does not match Hilbert space");
  }
  const Operator defect = hamiltonian_ - Operator(hamiltonian_.adjoint());
  for (Index k = 0; k < defect.nonZeros(); ++k) {
    if (std::abs(defect.valuePtr()[k]) > 1e-12) throw ContractViolation("Hamiltonian is not Hermitian");
  }
  std::vector<std::pair<double, Operator>> channels;
  for (const auto& d : dissipators_) {
    if (!(d.rate >= 0.0)) throw ContractViolation("dissipation rates must be >= 0");
    channels.emplace_back(d.rate, d.op);
  }
  kernel_ = kernels::make_lindblad_kernel(hamiltonian_, channels);
}

void LindbladGenerator::apply(const CMatrix& rho, CMatrix& out, CMatrix& scratch, kernels::Exec exec) const {
  const Index d = dim();
  out.resize(d, d);
  scratch.resize(d, d);
  kernels::lindblad_apply(kernel_, rho.data(), out.data(), scratch.data(), exec);
}

LindbladGenerator build_generator(const SystemParams& params, const HilbertSpace& space) {
  Operator h = build_hamiltonian(params, space);
  std::vector<Dissipator> diss;
  diss.push_back({SystemParams::kappa, embed(annihilation_op(space.dim(0)), 0, space)});
  for (int k = 0; k < params.n_mech(); ++k) {
    diss.push_back({params.gamma[static_cast<std::size_t>(k)], embed(annihilation_op(space.dim(k + 1)), k + 1, space)});
  }
  return LindbladGenerator(space, std::move(h), std::move(diss));
}

CMatrix liouvillian_apply(const LindbladGenerator& gen, const CMatrix& rho) {
  if (rho.rows() != gen.dim() || rho.cols() != gen.dim()) throw ShapeError("density matrix does not match generator");
  if (hermiticity_defect(rho) > 1e-12) throw ContractViolation("Liouvillian input is not Hermitian");
  CMatrix out, scratch;
  gen.apply(rho, out, scratch);
  return out;
}

CMatrix liouvillian_apply_reference(const LindbladGenerator& gen, const CMatrix& rho) {
  if (rho.rows() != gen.dim() || rho.cols() != gen.dim()) throw ShapeError("density matrix does not match generator");
  const Operator& h = gen.hamiltonian();
  CMatrix hr = h * rho;
  CMatrix rh = (Operator(h.transpose()) * rho.transpose()).transpose();
  CMatrix out = cplx(0.0, -1.0) * (hr - rh);
  for (const auto& d : gen.dissipators()) {
    const Operator& c = d.op;
    const Operator cd = Operator(c.adjoint());
    const Operator cdc = cd * c;
    CMatrix c_rho = c * rho;
    CMatrix c_rho_cd = (Operator(cd.transpose()) * c_rho.transpose()).transpose();
    CMatrix cdc_rho = cdc * rho;
    CMatrix rho_cdc = (Operator(cdc.transpose()) * rho.transpose()).transpose();
    out += d.rate * (c_rho_cd - 0.5 * cdc_rho - 0.5 * rho_cdc);
  }
  return out;
}

Eigen::SparseMatrix<cplx> superoperator(const LindbladGenerator& gen) {
  const Index d = gen.dim();
  if (d > 46340) throw InvalidDimension("superoperator dimension overflows the index type");
  using Col = Eigen::SparseMatrix<cplx>;
  // vec(A rho B) = (B^T kron A) vec(rho), column-major vec.
  const Col h = Col(gen.kernel().minus_i_heff);  // -i H_eff
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<std::size_t>(2 * h.nonZeros() * d + d * d * gen.dissipators().size()));
  // -i H_eff rho  ->  (I kron -iH_eff)
  for (Index k = 0; k < h.outerSize(); ++k)
    for (Col::InnerIterator it(h, k); it; ++it)
      for (Index j = 0; j < d; ++j) t.emplace_back(j * d + it.row(), j * d + it.col(), it.value());
  // (-i H_eff rho)^dag = rho (i H_eff^dag) -> ((i H_eff^dag)^T kron I) = (conj(-i H_eff) kron I)
  for (Index k = 0; k < h.outerSize(); ++k)
    for (Col::InnerIterator it(h, k); it; ++it)
      for (Index i = 0; i < d; ++i) t.emplace_back(it.row() * d + i, it.col() * d + i, std::conj(it.value()));
  // rate c rho c^dag -> rate (conj(c) kron c)
  for (const auto& diss : gen.dissipators()) {
    if (diss.rate == 0.0) continue;
    const Col c = Col(diss.op);
    for (Index k1 = 0; k1 < c.outerSize(); ++k1)
      for (Col::InnerIterator a(c, k1); a; ++a)
        for (Index k2 = 0; k2 < c.outerSize(); ++k2)
          for (Col::InnerIterator b(c, k2); b; ++b)
            t.emplace_back(a.row() * d + b.row(), a.col() * d + b.col(), diss.rate * std::conj(a.value()) * b.value());
  }
  Col l(d * d, d * d);
  l.setFromTriplets(t.begin(), t.end());
  l.makeCompressed();
  return l;
}

}  // namespace optomech
