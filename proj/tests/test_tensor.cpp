#include "doctest.h"

#include "causalis/tensor.hpp"

#include <random>

using namespace causalis;

namespace {

const SpaceLabel AI{"AI", 2}, AO{"AO", 2}, BI{"BI", 2}, BO{"BO", 2};

MatrixC random_hermitian(Index n, std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  MatrixC x(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      x(i, j) = cplx(g(rng), g(rng));
  return x + x.adjoint();
}

double diff(const LabeledOperator &a, const LabeledOperator &b) {
  REQUIRE(a.space() == b.space());
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

MatrixC pauli(char c) {
  MatrixC m(2, 2);
  if (c == 'x')
    m << 0, 1, 1, 0;
  else if (c == 'y')
    m << 0, cplx(0, -1), cplx(0, 1), 0;
  else
    m << 1, 0, 0, -1;
  return m;
}

} // namespace

TEST_CASE("spaces reject bad factors") {
  CHECK_THROWS_AS(TensorSpace({AI, AI}), LabelError);
  CHECK_THROWS_AS(TensorSpace({SpaceLabel{"X", 0}}), LabelError);
  const TensorSpace s{AI, SpaceLabel{"AO", 3}, BI};
  CHECK(s.dim() == 12);
  CHECK(s.dim_of(LabelSet{"AO", "BI"}) == 6);
  CHECK(s.without({"AO"}) == TensorSpace{AI, BI});
  CHECK_THROWS_AS(LabeledOperator(s, MatrixC::Zero(4, 4)), LabelError);
}

TEST_CASE("tensor products") {
  CHECK(diff(tensor(identity_on({AI}), identity_on({AO})), identity_on({AI, AO})) == 0);

  const LabeledOperator k0 = on(AI, ket_projector(basis_ket(2, 0)));
  const LabeledOperator k1 = on(BI, ket_projector(basis_ket(2, 1)));
  const LabeledOperator p = tensor(k0, k1);
  CHECK(p.space() == TensorSpace{AI, BI});
  CHECK(diff(p, {TensorSpace{AI, BI}, ket_projector(basis_ket(4, 1))}) == 0);

  // (X (x) Z)_{(i k),(j l)} = X_ij Z_kl
  const LabeledOperator xz = tensor(on(AI, pauli('x')), on(BI, pauli('z')));
  MatrixC expect = MatrixC::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          expect(2 * i + k, 2 * j + l) = pauli('x')(i, j) * pauli('z')(k, l);
  CHECK((xz.matrix() - expect).cwiseAbs().maxCoeff() == 0);

  CHECK_THROWS_AS(tensor(k0, on(AI, pauli('z'))), LabelError);
}

TEST_CASE("partial trace") {
  CHECK(diff(partial_trace(max_entangled(AO, BI), {"AO"}), identity_on({BI})) == 0);

  std::mt19937_64 rng(1);
  const MatrixC rho = random_hermitian(2, rng), sigma = random_hermitian(3, rng);
  const SpaceLabel X{"X", 3};
  const LabeledOperator prod = tensor(on(AI, rho), on(X, sigma));
  CHECK(diff(partial_trace(prod, {"X"}), on(AI, rho * sigma.trace())) < 1e-13);

  // brute force over index tuples, middle factor of (2, 3, 2)
  const TensorSpace s{AI, X, BI};
  const LabeledOperator m{s, random_hermitian(12, rng)};
  MatrixC oracle = MatrixC::Zero(4, 4);
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c)
      for (int a2 = 0; a2 < 2; ++a2)
        for (int c2 = 0; c2 < 2; ++c2)
          for (int b = 0; b < 3; ++b)
            oracle(2 * a + c, 2 * a2 + c2) += m.matrix()(6 * a + 2 * b + c, 6 * a2 + 2 * b + c2);
  const LabeledOperator t = partial_trace(m, {"X"});
  CHECK(t.space() == TensorSpace{AI, BI});
  CHECK((t.matrix() - oracle).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(t.trace() - m.trace()) < 1e-12);

  CHECK(diff(partial_trace(m, {"AI", "X"}), partial_trace(partial_trace(m, {"X"}), {"AI"})) < 1e-12);
  CHECK(diff(partial_trace(m, {"BI", "AI"}), partial_trace(m, {"AI", "BI"})) < 1e-12);
  CHECK_THROWS_AS(partial_trace(m, {"CI"}), LabelError);
}

TEST_CASE("trace and replace") {
  const TensorSpace s{AI, AO, BI, BO};
  CHECK(diff(trace_and_replace(identity_on(s), {"AO", "BI"}), identity_on(s)) < 1e-15);

  std::mt19937_64 rng(2);
  const LabeledOperator m{s, random_hermitian(16, rng)};
  const LabeledOperator once = trace_and_replace(m, {"AO"});
  CHECK(diff(trace_and_replace(once, {"AO"}), once) < 1e-12);
  CHECK(std::abs(once.trace() - m.trace()) < 1e-12);
  CHECK(diff(trace_and_replace(trace_and_replace(m, {"AI"}), {"BO"}),
             trace_and_replace(trace_and_replace(m, {"BO"}), {"AI"})) < 1e-12);
  CHECK(diff(trace_and_replace(trace_and_replace(m, {"AI"}), {"BO"}),
             trace_and_replace(m, {"AI", "BO"})) < 1e-12);

  // 1/2 (x) |phi+><phi+| (x) 1 is unchanged by replacing BO
  const LabeledOperator w = tensor(on(AI, MatrixC::Identity(2, 2) / 2.0),
                                   max_entangled(AO, BI), identity_on({BO}));
  CHECK(diff(trace_and_replace(w, {"BO"}), w) < 1e-15);
  CHECK(diff(trace_and_replace(w, {"AO"}), w) > 0.1);
  CHECK_THROWS_AS(trace_and_replace(w, {"CI"}), LabelError);
}

TEST_CASE("partial transpose") {
  std::mt19937_64 rng(3);
  const MatrixC rho = random_hermitian(2, rng), sigma = random_hermitian(2, rng);
  CHECK(diff(partial_transpose(tensor(on(AI, rho), on(BI, sigma)), {"BI"}),
             tensor(on(AI, rho), on(BI, sigma.transpose()))) < 1e-15);

  const LabeledOperator swap = partial_transpose(max_entangled(AO, BI), {"BI"});
  Eigen::SelfAdjointEigenSolver<MatrixC> es(swap.matrix());
  CHECK(es.eigenvalues()(0) == doctest::Approx(-1));
  for (int i = 1; i < 4; ++i)
    CHECK(es.eigenvalues()(i) == doctest::Approx(1));

  const TensorSpace s{AI, AO, BI};
  const LabeledOperator m{s, random_hermitian(8, rng)};
  const LabeledOperator t = partial_transpose(m, {"AO"});
  CHECK(diff(partial_transpose(t, {"AO"}), m) == 0);
  CHECK(std::abs(t.trace() - m.trace()) < 1e-12);
  CHECK(t.is_hermitian());
  CHECK(diff(partial_transpose(trace_and_replace(m, {"AI"}), {"BI"}),
             trace_and_replace(partial_transpose(m, {"BI"}), {"AI"})) < 1e-12);
  CHECK_THROWS_AS(partial_transpose(m, {"BO"}), LabelError);
}

TEST_CASE("permutations") {
  const LabeledOperator k = tensor(on(AI, ket_projector(basis_ket(2, 0))),
                                   on(BI, ket_projector(basis_ket(2, 1))));
  const LabeledOperator p = permute_to(k, TensorSpace{BI, AI});
  CHECK(diff(p, {TensorSpace{BI, AI}, ket_projector(basis_ket(4, 2))}) == 0);
  CHECK(permute_to(k, k.space()).matrix() == k.matrix());

  std::mt19937_64 rng(4);
  const SpaceLabel X{"X", 3};
  const LabeledOperator m{TensorSpace{AI, X, BO}, random_hermitian(12, rng)};
  const LabeledOperator r = permute_to(m, TensorSpace{BO, AI, X});
  CHECK(std::abs(r.trace() - m.trace()) < 1e-12);
  CHECK(diff(permute_to(r, m.space()), m) == 0);
  CHECK(diff(partial_trace(r, {"AI"}), permute_to(partial_trace(m, {"AI"}), TensorSpace{BO, X})) < 1e-12);
  CHECK_THROWS_AS(permute_to(m, TensorSpace{AI, X}), LabelError);
  CHECK_THROWS_AS(permute_to(m, TensorSpace{AI, SpaceLabel{"X", 2}, BO}), LabelError);
}

TEST_CASE("contraction and expectation") {
  std::mt19937_64 rng(5);
  const TensorSpace s{AI, AO, BI};
  const LabeledOperator m{s, random_hermitian(8, rng)};
  const LabeledOperator x{TensorSpace{AO}, random_hermitian(2, rng)};
  // Tr_AO[(1 (x) x (x) 1) m]
  const LabeledOperator full = tensor(identity_on({AI}), x, identity_on({BI}));
  const LabeledOperator oracle = partial_trace(
      LabeledOperator{s, full.matrix() * m.matrix()}, {"AO"});
  CHECK(diff(contract(m, x), oracle) < 1e-12);

  const LabeledOperator y{TensorSpace{BI, AI, AO}, random_hermitian(8, rng)};
  CHECK(std::abs(expectation(m, y) - (permute_to(y, s).matrix() * m.matrix()).trace()) < 1e-11);
}

TEST_CASE("hermitian coordinates") {
  std::mt19937_64 rng(6);
  const MatrixC h = random_hermitian(5, rng), g = random_hermitian(5, rng);
  const Eigen::VectorXd v = hermitian_coords(h);
  CHECK((from_hermitian_coords(v, 5) - h).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(v.dot(hermitian_coords(g)) == doctest::Approx((h * g).trace().real()));
  CHECK(is_psd(LabeledOperator::identity({AI})));
  CHECK_FALSE(is_psd(on(AI, pauli('z'))));
  CHECK(min_eigenvalue(pauli('y')) == doctest::Approx(-1));
}
