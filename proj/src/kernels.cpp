#include "optomech/kernels.hpp"

#include <omp.h>

#include <algorithm>

#include "optomech/error.hpp"

namespace optomech::kernels {

namespace {

constexpr Index kTile = 64;
// Below this many elements thread start-up costs more than it saves.
constexpr std::size_t kParallelThreshold = 1u << 14;

bool use_threads(Exec exec, std::size_t work) {
  return exec == Exec::Parallel && work >= kParallelThreshold && omp_get_max_threads() > 1;
}

JumpChannel make_channel(double rate, const Operator& op) {
  JumpChannel ch;
  ch.rate = rate;
  ch.op = op;
  ch.single_entry = true;
  ch.source.assign(static_cast<std::size_t>(op.rows()), -1);
  ch.value.assign(static_cast<std::size_t>(op.rows()), cplx(0.0));
  for (Index r = 0; r < op.outerSize(); ++r) {
    int count = 0;
    for (Operator::InnerIterator it(op, r); it; ++it) {
      if (it.value() == cplx(0.0)) continue;
      ++count;
      ch.source[static_cast<std::size_t>(r)] = static_cast<int>(it.col());
      ch.value[static_cast<std::size_t>(r)] = it.value();
    }
    if (count > 1) ch.single_entry = false;
  }
  if (!ch.single_entry) {
    ch.source.clear();
    ch.value.clear();
  }
  return ch;
}

}  // namespace

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int n) {
  if (n < 1) throw DomainError("thread count must be >= 1");
  omp_set_num_threads(n);
}

LindbladKernel make_lindblad_kernel(const Operator& hamiltonian,
                                    const std::vector<std::pair<double, Operator>>& channels) {
  LindbladKernel k;
  k.dim = hamiltonian.rows();
  Operator heff = hamiltonian;
  for (const auto& [rate, op] : channels) {
    if (op.rows() != k.dim || op.cols() != k.dim) throw ShapeError("collapse operator does not match Hamiltonian");
    if (rate == 0.0) continue;
    const Operator cdc = Operator(op.adjoint()) * op;
    heff -= cplx(0.0, 0.5 * rate) * cdc;
    k.jumps.push_back(make_channel(rate, op));
  }
  k.minus_i_heff = cplx(0.0, -1.0) * heff;
  k.minus_i_heff.prune(cplx(0.0), 0.0);
  k.minus_i_heff.makeCompressed();
  return k;
}

void sparse_times_dense(const Operator& a, const cplx* x, cplx* out, Index cols, Exec exec) {
  const Index rows = a.rows();
  const Index inner = a.cols();
  const int* outer = a.outerIndexPtr();
  const int* idx = a.innerIndexPtr();
  const cplx* val = a.valuePtr();
  const bool par = use_threads(exec, static_cast<std::size_t>(a.nonZeros() * cols));
#pragma omp parallel for schedule(static) if (par)
  for (Index j = 0; j < cols; ++j) {
    const cplx* xj = x + j * inner;
    cplx* oj = out + j * rows;
    for (Index i = 0; i < rows; ++i) {
      cplx acc(0.0);
      for (int p = outer[i]; p < outer[i + 1]; ++p) acc += val[p] * xj[idx[p]];
      oj[i] = acc;
    }
  }
}

void lindblad_apply(const LindbladKernel& k, const cplx* rho, cplx* out, cplx* scratch, Exec exec) {
  const Index d = k.dim;
  const std::size_t work = static_cast<std::size_t>(d * d);

  // scratch = -i H_eff rho
  sparse_times_dense(k.minus_i_heff, rho, scratch, d, exec);

  // out = scratch + scratch^dag, tiled so the transposed reads stay in cache.
  const Index tiles = (d + kTile - 1) / kTile;
  const bool par = use_threads(exec, work);
#pragma omp parallel for schedule(static) if (par)
  for (Index tj = 0; tj < tiles; ++tj) {
    const Index j0 = tj * kTile;
    const Index j1 = std::min(d, j0 + kTile);
    for (Index ti = 0; ti < tiles; ++ti) {
      const Index i0 = ti * kTile;
      const Index i1 = std::min(d, i0 + kTile);
      for (Index j = j0; j < j1; ++j)
        for (Index i = i0; i < i1; ++i) out[j * d + i] = scratch[j * d + i] + std::conj(scratch[i * d + j]);
    }
  }

  for (const JumpChannel& ch : k.jumps) {
    if (ch.single_entry) {
      const int* src = ch.source.data();
      const cplx* v = ch.value.data();
      const double rate = ch.rate;
#pragma omp parallel for schedule(static) if (par)
      for (Index j = 0; j < d; ++j) {
        const int sj = src[j];
        if (sj < 0) continue;
        const cplx wj = rate * std::conj(v[j]);
        const cplx* rcol = rho + static_cast<Index>(sj) * d;
        cplx* ocol = out + j * d;
        for (Index i = 0; i < d; ++i) {
          const int si = src[i];
          if (si >= 0) ocol[i] += v[i] * wj * rcol[si];
        }
      }
    } else {
      // c rho c^dag = c (c rho)^dag for Hermitian rho.
      std::vector<cplx> tmp(work), tmp2(work);
      sparse_times_dense(ch.op, rho, tmp.data(), d, exec);
      for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < d; ++i) tmp2[static_cast<std::size_t>(j * d + i)] = std::conj(tmp[static_cast<std::size_t>(i * d + j)]);
      sparse_times_dense(ch.op, tmp2.data(), tmp.data(), d, exec);
      for (std::size_t q = 0; q < work; ++q) out[q] += ch.rate * tmp[q];
    }
  }
}

template <class T>
void linear_combination(T* y, std::size_t n, const std::vector<const T*>& xs, const std::vector<double>& coeffs,
                        bool accumulate, Exec exec) {
  const std::size_t m = xs.size();
  const bool par = use_threads(exec, n);
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    T acc = accumulate ? y[i] : T(0);
    for (std::size_t s = 0; s < m; ++s) acc += coeffs[s] * xs[s][i];
    y[i] = acc;
  }
}

template void linear_combination<double>(double*, std::size_t, const std::vector<const double*>&,
                                         const std::vector<double>&, bool, Exec);
template void linear_combination<cplx>(cplx*, std::size_t, const std::vector<const cplx*>&,
                                       const std::vector<double>&, bool, Exec);

}  // namespace optomech::kernels
