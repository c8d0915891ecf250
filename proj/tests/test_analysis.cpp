#include <cmath>
#include <numbers>

#include "doctest.h"
#include "optomech/analysis.hpp"
#include "optomech/error.hpp"
#include "test_util.hpp"

using namespace optomech;

namespace {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

TEST_CASE("partial trace of a product returns the factor") {
  std::mt19937 rng(7);
  const CMatrix ra = testutil::random_density(3, rng);
  const CMatrix rb = testutil::random_density(4, rng);
  const auto st = QuantumState::density(HilbertSpace({3, 4}), kron(ra, rb));
  const int first[] = {0};
  const int second[] = {1};
  CHECK(testutil::max_abs(partial_trace(st, first).matrix() - ra) < 1e-14);
  CHECK(testutil::max_abs(partial_trace(st, second).matrix() - rb) < 1e-14);
  const int none[] = {-1};
  CHECK_THROWS_AS(partial_trace(st, std::span<const int>()), DomainError);
  CHECK_THROWS_AS(partial_trace(st, none), DomainError);
}

TEST_CASE("partial trace of a Bell state is maximally mixed") {
  CVector psi = CVector::Zero(4);
  psi(0) = psi(3) = 1.0 / std::sqrt(2.0);
  const auto st = QuantumState::pure(HilbertSpace({2, 2}), psi);
  const int first[] = {0};
  const CMatrix r = partial_trace(st, first).matrix();
  CHECK(testutil::max_abs(r - 0.5 * CMatrix::Identity(2, 2)) < 1e-15);
}

TEST_CASE("reduced expectation values match embedded operators") {
  std::mt19937 rng(13);
  HilbertSpace s({2, 3, 4});
  for (int k = 0; k < 100; ++k) {
    const auto st = QuantumState::density(s, testutil::random_density(s.total(), rng));
    const int keep[] = {1};
    const CMatrix red = partial_trace(st, keep).matrix();
    const cplx a = expectation(position_op(3), red);
    const cplx b = expectation(embed(position_op(3), 1, s), st.matrix());
    CHECK(std::abs(a - b) < 1e-12);
  }
  // multi-mode kept set preserves mode order
  const auto st = QuantumState::density(s, testutil::random_density(s.total(), rng));
  const int keep[] = {2, 0};
  const auto red = partial_trace(st, keep);
  CHECK(red.space().dim(0) == 2);
  CHECK(red.space().dim(1) == 4);
  const cplx a = expectation(embed(number_op(4), 1, red.space()), red.matrix());
  const cplx b = expectation(embed(number_op(4), 2, s), st.matrix());
  CHECK(std::abs(a - b) < 1e-12);
}

TEST_CASE("position distributions") {
  std::vector<double> x;
  for (int i = 0; i < 2000; ++i) x.push_back(-10.0 + 0.01 * i);
  const auto vac = fock_state(HilbertSpace({12}), std::vector<int>{0});
  const auto p0 = position_distribution(vac, x);
  for (std::size_t i = 0; i < x.size(); i += 50)
    CHECK(std::abs(p0(static_cast<Index>(i)) - std::exp(-x[i] * x[i]) / std::sqrt(std::numbers::pi)) < 1e-14);
  CHECK(integrate_uniform(p0, 0.01) == doctest::Approx(1.0).epsilon(1e-6));

  const auto coh = coherent_state(40, cplx(1.5, 0.0));
  const auto pc = position_distribution(coh, x);
  const double x0 = std::sqrt(2.0) * 1.5;
  for (std::size_t i = 0; i < x.size(); i += 50)
    CHECK(std::abs(pc(static_cast<Index>(i)) - std::exp(-(x[i] - x0) * (x[i] - x0)) / std::sqrt(std::numbers::pi)) < 1e-10);

  const auto cat = prepare_cat_state(1.5, std::numbers::pi, 30);
  const double zero[] = {0.0};
  CHECK(std::abs(position_distribution(cat, zero)(0)) < 1e-14);

  std::mt19937 rng(3);
  const auto mixed = QuantumState::density(HilbertSpace({10}), testutil::random_density(10, rng));
  CHECK(position_distribution(mixed, x).minCoeff() > -1e-10);
  CHECK_THROWS_AS(position_distribution(QuantumState::pure(HilbertSpace({2, 2}), CVector::Unit(4, 0)), x), ShapeError);
}

TEST_CASE("Schmidt decomposition") {
  const auto prod = fock_state(HilbertSpace({3, 3}), std::vector<int>{1, 2});
  const auto sp = schmidt_decompose(prod);
  CHECK(sp.schmidt_number == 1);
  CHECK(sp.coefficients(0) == doctest::Approx(1.0));

  CVector psi = CVector::Zero(4);
  psi(1) = psi(2) = 1.0 / std::sqrt(2.0);
  const auto sb = schmidt_decompose(QuantumState::pure(HilbertSpace({2, 2}), psi));
  CHECK(sb.coefficients(0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(sb.coefficients(1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(sb.schmidt_number == 2);

  std::mt19937 rng(21);
  const auto st = QuantumState::pure(HilbertSpace({4, 6}), testutil::random_state(24, rng));
  const auto sd = schmidt_decompose(st);
  CHECK(sd.coefficients.squaredNorm() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((sd.basis_1.adjoint() * sd.basis_1 - CMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((sd.basis_2.adjoint() * sd.basis_2 - CMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  // reconstruction sum_i lambda_i |u_i> |v_i>
  CVector rec = CVector::Zero(24);
  for (Index i = 0; i < 4; ++i)
    for (Index a = 0; a < 4; ++a)
      for (Index b = 0; b < 6; ++b) rec(a * 6 + b) += sd.coefficients(i) * sd.basis_1(a, i) * sd.basis_2(b, i);
  CHECK((rec - st.vector()).cwiseAbs().maxCoeff() < 1e-12);
  // entropy of the marginal from Schmidt coefficients
  double s = 0.0;
  for (Index i = 0; i < 4; ++i) {
    const double l2 = sd.coefficients(i) * sd.coefficients(i);
    if (l2 > 0) s -= l2 * std::log(l2);
  }
  const int first[] = {0};
  CHECK(std::abs(s - von_neumann_entropy(partial_trace(st, first))) < 1e-8);

  const auto mixed = QuantumState::density(HilbertSpace({2, 2}), 0.25 * CMatrix::Identity(4, 4));
  CHECK_THROWS_AS(schmidt_decompose(mixed), DomainError);
}

TEST_CASE("von Neumann entropy") {
  const auto pure = QuantumState::pure(HilbertSpace({3}), CVector::Unit(3, 1));
  CHECK(von_neumann_entropy(pure) == 0.0);
  CHECK(std::abs(von_neumann_entropy(pure.density_matrix())) < 1e-10);
  CHECK(von_neumann_entropy(0.25 * CMatrix::Identity(4, 4)) == doctest::Approx(std::log(4.0)));
  CHECK_THROWS_AS(von_neumann_entropy(0.3 * CMatrix::Identity(4, 4)), ContractViolation);
  CMatrix neg = CMatrix::Zero(2, 2);
  neg(0, 0) = 1.0 + 1e-9;
  neg(1, 1) = -1e-9;
  CHECK(von_neumann_entropy(neg) >= 0.0);
  neg(0, 0) = 1.01;
  neg(1, 1) = -0.01;
  CHECK_THROWS_AS(von_neumann_entropy(neg), ContractViolation);
}

TEST_CASE("mutual information") {
  std::mt19937 rng(8);
  const CMatrix ra = testutil::random_density(3, rng);
  const CMatrix rb = testutil::random_density(3, rng);
  const auto prod = QuantumState::density(HilbertSpace({3, 3}), kron(ra, rb));
  CHECK(std::abs(mutual_information(prod)) < 1e-10);

  const auto ent = QuantumState::pure(HilbertSpace({3, 4}), testutil::random_state(12, rng));
  const auto rep = entropy_report(ent);
  CHECK(rep.joint == 0.0);
  CHECK(rep.mutual_information == doctest::Approx(2.0 * rep.s1));
  CHECK(rep.s1 == doctest::Approx(rep.s2));

  for (int k = 0; k < 20; ++k) {
    const auto st = QuantumState::density(HilbertSpace({3, 4}), testutil::random_density(12, rng, 3));
    const auto r = entropy_report(st);
    CHECK(r.joint <= r.s1 + r.s2 + 1e-8);
    CHECK(r.mutual_information >= -1e-10);
  }
}

TEST_CASE("angular momentum of coherent products") {
  HilbertSpace s({2, 20, 20});
  const cplx b1(1.0, 0.0), b2(0.0, 0.7);
  const QuantumState factors[] = {fock_state(HilbertSpace({2}), std::vector<int>{0}), coherent_state(20, b1),
                                  coherent_state(20, b2)};
  const auto st = product_state(factors);
  const Operator l = angular_momentum_operator(s, 1, 2);
  CHECK(hermiticity_defect(CMatrix(l)) < 1e-14);
  // <x> = sqrt2 Re b, <p> = sqrt2 Im b
  const double x1 = std::sqrt(2.0) * b1.real(), p1 = std::sqrt(2.0) * b1.imag();
  const double x2 = std::sqrt(2.0) * b2.real(), p2 = std::sqrt(2.0) * b2.imag();
  CHECK(std::abs(expectation(l, st.density_matrix()) - cplx(x1 * p2 - x2 * p1)) < 1e-10);
  CHECK_THROWS_AS(angular_momentum_operator(s, 1, 1), DomainError);
}
