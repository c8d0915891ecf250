#include <cmath>

#include "doctest.h"
#include "optomech/error.hpp"
#include "optomech/kernels.hpp"
#include "optomech/model.hpp"
#include "test_util.hpp"

using namespace optomech;

namespace {

SystemParams linear_two_mode() {
  SystemParams p;
  p.coupling = Coupling::Linear;
  p.g = {0.3, 0.25};
  p.gamma = {0.002, 0.003};
  p.delta_c = -1.5;
  p.eta = 0.16;
  p.omega_m = 0.01;
  return p;
}

}  // namespace

TEST_CASE("parameter validation names the field") {
  SystemParams p = linear_two_mode();
  p.g.clear();
  p.gamma.clear();
  try {
    p.validate();
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "params.g");
  }
  p = linear_two_mode();
  p.gamma = {0.1};
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = linear_two_mode();
  p.gamma[1] = -1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = linear_two_mode();
  p.omega_m = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK(coupling_from_string("quadratic") == Coupling::Quadratic);
  CHECK_THROWS_AS(coupling_from_string("cubic"), ValidationError);
}

TEST_CASE("Hamiltonian matrix elements") {
  SystemParams p;
  p.coupling = Coupling::Linear;
  p.g = {0.3};
  p.gamma = {0.0};
  p.delta_c = -1.5;
  p.eta = 0.2;
  p.omega_m = 0.01;
  HilbertSpace s({3, 4});
  const CMatrix h = CMatrix(build_hamiltonian(p, s));
  CHECK(hermiticity_defect(h) < 1e-15);
  auto idx = [&](int na, int nb) {
    const int occ[] = {na, nb};
    return s.flat_index(occ);
  };
  // pump: <1,0|H|0,0> = i eta
  CHECK(std::abs(h(idx(1, 0), idx(0, 0)) - cplx(0.0, 0.2)) < 1e-15);
  // diagonal: -Delta n_a + omega (n_b + 1/2)
  CHECK(std::abs(h(idx(2, 1), idx(2, 1)) - cplx(3.0 + 0.01 * 1.5)) < 1e-14);
  // coupling: -g n_a x, x_{01} = 1/sqrt 2
  CHECK(std::abs(h(idx(2, 0), idx(2, 1)) - cplx(-0.3 * 2.0 / std::sqrt(2.0))) < 1e-14);
  CHECK_THROWS_AS(build_hamiltonian(p, HilbertSpace({3, 4, 4})), ShapeError);

  p.coupling = Coupling::Quadratic;
  const CMatrix hq = CMatrix(build_hamiltonian(p, s));
  // +g n_a x^2, (x^2)_{00} = 1/2
  CHECK(std::abs(hq(idx(1, 0), idx(1, 0)) - cplx(1.5 + 0.005 + 0.3 * 0.5)) < 1e-14);
}

TEST_CASE("parallel, serial and reference Liouvillians agree") {
  kernels::set_thread_count(4);
  const SystemParams p = linear_two_mode();
  HilbertSpace s({3, 8, 8});  // 192^2 elements, above the threading threshold
  const auto gen = build_generator(p, s);
  std::mt19937 rng(11);
  const CMatrix rho = testutil::random_density(s.total(), rng);

  CMatrix serial, parallel, scratch;
  gen.apply(rho, serial, scratch, kernels::Exec::Serial);
  gen.apply(rho, parallel, scratch, kernels::Exec::Parallel);
  const CMatrix ref = liouvillian_apply_reference(gen, rho);
  CHECK(testutil::max_abs(serial - parallel) == 0.0);
  CHECK(testutil::max_abs(serial - ref) < 1e-12 * std::max(1.0, testutil::max_abs(ref)));
  kernels::set_thread_count(1);
}

TEST_CASE("Liouvillian preserves trace and Hermiticity") {
  const SystemParams p = linear_two_mode();
  HilbertSpace s({3, 5, 5});
  const auto gen = build_generator(p, s);
  std::mt19937 rng(5);
  for (int k = 0; k < 10; ++k) {
    const CMatrix out = liouvillian_apply(gen, testutil::random_density(s.total(), rng));
    CHECK(std::abs(out.trace()) < 1e-12);
    CHECK(hermiticity_defect(out) < 1e-12);
  }
  CMatrix bad = testutil::random_density(s.total(), rng);
  bad(0, 1) += 1e-6;
  CHECK_THROWS_AS(liouvillian_apply(gen, bad), ContractViolation);
}

TEST_CASE("superoperator matches matrix-free application") {
  SystemParams p = linear_two_mode();
  p.coupling = Coupling::Quadratic;
  HilbertSpace s({3, 4, 3});
  const auto gen = build_generator(p, s);
  const auto l = superoperator(gen);
  std::mt19937 rng(9);
  const CMatrix rho = testutil::random_density(s.total(), rng);
  const CVector v = Eigen::Map<const CVector>(rho.data(), rho.size());
  const CVector lv = l * v;
  const CMatrix direct = liouvillian_apply(gen, rho);
  CHECK((lv - Eigen::Map<const CVector>(direct.data(), direct.size())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("non-Hermitian Hamiltonians are rejected") {
  HilbertSpace s({2, 2});
  Operator h = embed(annihilation_op(2), 0, s);
  CHECK_THROWS_AS(LindbladGenerator(s, h, {}), ContractViolation);
}

TEST_CASE("general collapse operators take the fallback path") {
  HilbertSpace s({4});
  const Operator h = number_op(4);
  const Operator x = position_op(4);  // two entries per row
  LindbladGenerator gen(s, h, {{0.3, x}});
  CHECK_FALSE(gen.kernel().jumps.front().single_entry);
  std::mt19937 rng(2);
  const CMatrix rho = testutil::random_density(4, rng);
  const CMatrix a = liouvillian_apply(gen, rho);
  const CMatrix b = liouvillian_apply_reference(gen, rho);
  CHECK(testutil::max_abs(a - b) < 1e-13);
}
