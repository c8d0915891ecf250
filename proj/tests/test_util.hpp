#pragma once

#include <random>

#include "optomech/hilbert.hpp"

namespace testutil {

using optomech::CMatrix;
using optomech::CVector;
using optomech::Index;

inline CMatrix random_density(Index d, std::mt19937& rng, int rank = 0) {
  std::normal_distribution<double> n(0.0, 1.0);
  const Index r = rank > 0 ? rank : d;
  CMatrix a(d, r);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < r; ++j) a(i, j) = {n(rng), n(rng)};
  CMatrix rho = a * a.adjoint();
  rho /= rho.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

inline CVector random_state(Index d, std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CVector v(d);
  for (Index i = 0; i < d; ++i) v(i) = {n(rng), n(rng)};
  return v / v.norm();
}

inline double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testutil
