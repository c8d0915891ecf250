#include <cmath>

#include "doctest.h"
#include "optomech/error.hpp"
#include "optomech/hilbert.hpp"
#include "test_util.hpp"

using namespace optomech;

TEST_CASE("dimensions below two are rejected") {
  CHECK_THROWS_AS(HilbertSpace({1}), InvalidDimension);
  CHECK_THROWS_AS(HilbertSpace({4, 0}), InvalidDimension);
  CHECK_THROWS_AS(annihilation_op(1), InvalidDimension);
}

TEST_CASE("flat index places the last mode fastest") {
  HilbertSpace s({3, 4, 5});
  CHECK(s.total() == 60);
  CHECK(s.stride(2) == 1);
  CHECK(s.stride(1) == 5);
  CHECK(s.stride(0) == 20);
  const int occ[] = {2, 1, 3};
  CHECK(s.flat_index(occ) == 2 * 20 + 1 * 5 + 3);
  for (Index i = 0; i < s.total(); ++i) CHECK(s.flat_index(s.occupations(i)) == i);
}

TEST_CASE("ladder commutator is identity except at the truncation edge") {
  const int d = 7;
  const CMatrix c = CMatrix(commutator(annihilation_op(d), creation_op(d)));
  for (int i = 0; i < d; ++i) {
    const cplx expect = i == d - 1 ? cplx(1.0 - d) : cplx(1.0);
    CHECK(std::abs(c(i, i) - expect) < 1e-14);
  }
  CHECK((c - CMatrix(c.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("quadratures are Hermitian and reproduce the number operator") {
  const int d = 9;
  const CMatrix x = CMatrix(position_op(d));
  const CMatrix p = CMatrix(momentum_op(d));
  CHECK(hermiticity_defect(x) < 1e-15);
  CHECK(hermiticity_defect(p) < 1e-15);
  const CMatrix n = CMatrix(number_op(d));
  const CMatrix h = 0.5 * (x * x + p * p);
  // exact below the top level, where truncation shows up
  for (int i = 0; i < d - 1; ++i) CHECK(std::abs(h(i, i) - (n(i, i) + 0.5)) < 1e-13);
}

TEST_CASE("embedding acts on the requested mode only") {
  HilbertSpace s({2, 3});
  const Operator b = embed(annihilation_op(3), 1, s);
  const int from[] = {1, 2};
  const int to[] = {1, 1};
  CHECK(std::abs(CMatrix(b)(s.flat_index(to), s.flat_index(from)) - std::sqrt(2.0)) < 1e-15);
  const Operator a = embed(annihilation_op(2), 0, s);
  const int f2[] = {1, 2};
  const int t2[] = {0, 2};
  CHECK(std::abs(CMatrix(a)(s.flat_index(t2), s.flat_index(f2)) - 1.0) < 1e-15);
  CHECK_THROWS_AS(embed(annihilation_op(4), 1, s), ShapeError);
}

TEST_CASE("state validation") {
  HilbertSpace s({3});
  CVector v = CVector::Zero(3);
  v(0) = 1.0;
  CHECK_NOTHROW(QuantumState::pure(s, v));
  v(1) = 1e-4;
  CHECK_THROWS_AS(QuantumState::pure(s, v), ContractViolation);
  CMatrix rho = CMatrix::Zero(3, 3);
  rho(0, 0) = 0.5;
  rho(1, 1) = 0.5;
  CHECK_NOTHROW(QuantumState::density(s, rho));
  rho(0, 1) = 1e-9;
  CHECK_THROWS_AS(QuantumState::density(s, rho), ContractViolation);
  rho(0, 1) = 0.0;
  rho(1, 1) = 0.6;
  CHECK_THROWS_AS(QuantumState::density(s, rho), ContractViolation);
  CHECK_THROWS_AS(QuantumState::pure(s, CVector::Zero(4)), ShapeError);
}

TEST_CASE("coherent amplitudes carry the right mean and warn when truncated") {
  const cplx beta(1.2, -0.7);
  const auto st = coherent_state(40, beta);
  const CVector& psi = st.vector();
  const cplx mean = psi.dot(CMatrix(annihilation_op(40)) * psi);
  CHECK(std::abs(mean - beta) < 1e-12);
  CHECK(std::abs(psi.norm() - 1.0) < 1e-14);

  int warnings = 0;
  auto previous = set_warning_handler([&](const std::string&) { ++warnings; });
  (void)coherent_state(4, cplx(3.0, 0.0));
  set_warning_handler(previous);
  CHECK(warnings == 1);
  CHECK(coherent_truncation_floor(cplx(3.0, 4.0)) == doctest::Approx(25.0 + 25.0 + 5.0));
}

TEST_CASE("product states order factors by mode") {
  const auto a = fock_state(HilbertSpace({2}), std::vector<int>{1});
  const auto b = coherent_state(12, cplx(0.5, 0.0));
  const QuantumState factors[] = {a, b};
  const auto ab = product_state(factors);
  CHECK(ab.is_pure());
  CHECK(ab.space().total() == 24);
  for (int n = 0; n < 12; ++n) CHECK(std::abs(ab.vector()(12 + n) - b.vector()(n)) < 1e-15);

  std::mt19937 rng(3);
  const auto mixed = QuantumState::density(HilbertSpace({2}), testutil::random_density(2, rng));
  const QuantumState mixed_factors[] = {mixed, b};
  const auto m = product_state(mixed_factors);
  CHECK(!m.is_pure());
  CHECK(std::abs(m.matrix().trace() - cplx(1.0)) < 1e-12);
}
