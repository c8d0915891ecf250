#pragma once

// Hot loops of the master-equation solver. Each kernel has a serial and an
// OpenMP path selected at the call site; both produce bitwise-identical
// results because every output element is owned by exactly one thread and
// accumulated in a fixed order.

#include <vector>

#include "optomech/hilbert.hpp"

namespace optomech::kernels {

enum class Exec { Serial, Parallel };

/// Number of OpenMP threads the parallel path will use.
int thread_count();
void set_thread_count(int n);

/// Collapse channel. Ladder operators have at most one entry per row, which
/// lets c rho c^dag be evaluated as a gather instead of two sparse products.
struct JumpChannel {
  double rate = 0.0;
  bool single_entry = false;
  std::vector<int> source;     // column of the entry in row i, or -1
  std::vector<cplx> value;     // value of that entry
  Operator op;                 // general fallback
};

struct LindbladKernel {
  Index dim = 0;
  Operator minus_i_heff;  // -i (H - i/2 sum rate c^dag c)
  std::vector<JumpChannel> jumps;
};

LindbladKernel make_lindblad_kernel(const Operator& hamiltonian,
                                    const std::vector<std::pair<double, Operator>>& channels);

/// out = L(rho) for Hermitian rho, all buffers column-major dim x dim.
/// `scratch` must hold dim*dim elements.
void lindblad_apply(const LindbladKernel& k, const cplx* rho, cplx* out, cplx* scratch, Exec exec);

/// out(:, j) = a * x(:, j) for each of `cols` columns of length a.cols().
void sparse_times_dense(const Operator& a, const cplx* x, cplx* out, Index cols, Exec exec);

/// y[i] = sum_s coeff[s] * x_s[i] + (accumulate ? y[i] : 0).
template <class T>
void linear_combination(T* y, std::size_t n, const std::vector<const T*>& xs, const std::vector<double>& coeffs,
                        bool accumulate, Exec exec);

}  // namespace optomech::kernels
