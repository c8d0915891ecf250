#pragma once

// Rotating-frame Hamiltonian and Lindblad generator. All rates are in units of
// the cavity decay rate kappa (kappa == 1), energies in hbar*kappa.

#include <string_view>
#include <vector>

#include "optomech/hilbert.hpp"
#include "optomech/kernels.hpp"

namespace optomech {

enum class Coupling { Linear, Quadratic };

std::string_view to_string(Coupling c);
Coupling coupling_from_string(std::string_view s);

struct SystemParams {
  static constexpr double kappa = 1.0;

  Coupling coupling = Coupling::Linear;
  /// Single-photon couplings g_{0,k} (linear) or g^{(2)}_{0,k} (quadratic).
  std::vector<double> g;
  /// Pump-cavity detuning omega_L - omega_c.
  double delta_c = 0.0;
  /// Pump amplitude |eta|; the phase is gauged away.
  double eta = 0.0;
  double omega_m = 0.01;
  /// Mechanical damping rates gamma_k.
  std::vector<double> gamma;

  int n_mech() const noexcept { return static_cast<int>(g.size()); }
  /// Throws ValidationError when an invariant is broken.
  void validate() const;
};

/// H/hbar = -Delta_c a^dag a + i eta (a^dag - a) + (omega_m/2) sum (p_k^2 + x_k^2) + V,
/// V = -a^dag a sum g_k x_k (linear) or +a^dag a sum g_k x_k^2 (quadratic).
/// `space` must hold the cavity followed by n_mech mechanical modes.
Operator build_hamiltonian(const SystemParams& params, const HilbertSpace& space);

struct Dissipator {
  double rate = 0.0;
  Operator op;
};

/// H plus zero-temperature collapse channels. The Liouvillian is applied
/// matrix-free:
///   L(rho) = -i[H, rho] + sum_c rate_c (c rho c^dag - {c^dag c, rho}/2),
/// which for (kappa, a) and (gamma_k, b_k) is the (rate/2) D[c] form.
class LindbladGenerator {
 public:
  LindbladGenerator(HilbertSpace space, Operator hamiltonian, std::vector<Dissipator> dissipators);

  const HilbertSpace& space() const noexcept { return space_; }
  Index dim() const noexcept { return space_.total(); }
  const Operator& hamiltonian() const noexcept { return hamiltonian_; }
  const std::vector<Dissipator>& dissipators() const noexcept { return dissipators_; }
  const kernels::LindbladKernel& kernel() const noexcept { return kernel_; }

  /// Unchecked fast path used by the integrators: out = L(rho).
  void apply(const CMatrix& rho, CMatrix& out, CMatrix& scratch,
             kernels::Exec exec = kernels::Exec::Parallel) const;

 private:
  HilbertSpace space_;
  Operator hamiltonian_;
  std::vector<Dissipator> dissipators_;
  kernels::LindbladKernel kernel_;
};

/// Cavity decay (kappa, a) and mechanical decay (gamma_k, b_k) for the model.
LindbladGenerator build_generator(const SystemParams& params, const HilbertSpace& space);

/// Checked Liouvillian action: rejects non-Hermitian input (defect > 1e-12).
CMatrix liouvillian_apply(const LindbladGenerator& gen, const CMatrix& rho);

/// Reference evaluation with plain sparse-dense products, no fusion, no threads.
CMatrix liouvillian_apply_reference(const LindbladGenerator& gen, const CMatrix& rho);

/// Dense-index superoperator acting on column-major vec(rho), size D^2 x D^2.
Eigen::SparseMatrix<cplx> superoperator(const LindbladGenerator& gen);

}  // namespace optomech
