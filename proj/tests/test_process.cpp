#include "doctest.h"

#include "causalis/switch.hpp"

using namespace causalis;

namespace {

const SpaceLabel AI{"AI", 2}, AO{"AO", 2}, BI{"BI", 2}, BO{"BO", 2};
const PartyStructure kQubits = PartyStructure::bipartite(2, 2, 2, 2);

ProcessMatrix a_before_b() {
  return {tensor(on(AI, MatrixC::Identity(2, 2) / 2.0), max_entangled(AO, BI), identity_on({BO})),
          kQubits};
}

MatrixC wishart(Index n, std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  MatrixC x(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      x(i, j) = cplx(g(rng), g(rng));
  return x * x.adjoint();
}

} // namespace

TEST_CASE("party structures") {
  CHECK_FALSE(kQubits.tripartite());
  const auto t = PartyStructure::tripartite(2, 3, 2, 2, 4);
  CHECK(t.tripartite());
  CHECK(t.d("AO") == 3);
  CHECK(t.d_charlie() == 4);
  CHECK(PartyStructure::infer(kQubits.space) == kQubits);
  CHECK(PartyStructure::infer(reduced_switch().op.space()).charlie == LabelSet{"CIc"});
  CHECK_THROWS_AS(PartyStructure::infer(TensorSpace{AI, AO, BI}), LabelError);
  CHECK_THROWS_AS(PartyStructure::infer(TensorSpace{AI, AO, BI, BO, SpaceLabel{"DX", 2}}),
                  LabelError);
}

TEST_CASE("process validity") {
  const LabeledOperator noise = white_noise(kQubits);
  CHECK(noise.trace().real() == doctest::Approx(4));
  CHECK(validate_process(noise, kQubits).passed);
  CHECK(validate_process(a_before_b().op, kQubits).passed);

  // |phi+><phi+|^{AI AO} (x) 1^{BI BO}
  const LabeledOperator bad = tensor(max_entangled(AI, AO), identity_on({BI, BO}));
  const auto r = validate_process(bad, kQubits);
  CHECK_FALSE(r.passed);
  CHECK(r.worst() > 0.1);

  CHECK_THROWS_AS(validate_process(identity_on({AI, AO, BI}), kQubits), LabelError);
  const auto tri = PartyStructure::tripartite(2, 2, 2, 2, 2);
  CHECK(validate_process(white_noise(tri), tri).passed);
}

TEST_CASE("causal order") {
  const ProcessMatrix w = a_before_b();
  CHECK(is_causally_ordered(w, Order::AB).passed);
  const auto ba = is_causally_ordered(w, Order::BA);
  CHECK_FALSE(ba.passed);
  CHECK(ba.worst() > 0.1);
  const ProcessMatrix noise{white_noise(kQubits), kQubits};
  CHECK(is_causally_ordered(noise, Order::AB).passed);
  CHECK(is_causally_ordered(noise, Order::BA).passed);
  CHECK_THROWS(is_causally_ordered(w, Order::ABC));
}

TEST_CASE("separability of simple processes") {
  const ProcessMatrix noise{white_noise(kQubits), kQubits};
  const auto r = check_causal_separability(noise);
  REQUIRE(std::holds_alternative<CausalDecomposition>(r));
  const auto &d = std::get<CausalDecomposition>(r);
  CHECK(verify_decomposition(noise, d).passed);
  CHECK(d.q >= -1e-9);
  CHECK(d.q <= 1 + 1e-9);
  CHECK((d.first + d.second).trace().real() == doctest::Approx(4));

  const auto o = check_causal_separability(a_before_b());
  REQUIRE(std::holds_alternative<CausalDecomposition>(o));
  CHECK(std::get<CausalDecomposition>(o).q == doctest::Approx(1).epsilon(1e-6));
}

TEST_CASE("random processes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = random_process_matrix(kQubits, seed);
    CHECK(validate_process(w.op, kQubits).passed);
  }
  const auto tri = PartyStructure::tripartite(2, 2, 2, 2, 2);
  CHECK(validate_process(random_process_matrix(tri, 3).op, tri).passed);
  CHECK(random_process_matrix(kQubits, 7).op.matrix() == random_process_matrix(kQubits, 7).op.matrix());
  CHECK(random_process_matrix(kQubits, 7).op.matrix() != random_process_matrix(kQubits, 8).op.matrix());

  // the ensemble is unitarily invariant on each factor, so its mean is white noise
  MatrixC mean = MatrixC::Zero(16, 16);
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    mean += random_process_matrix(kQubits, 1000 + seed).op.matrix() / 100.0;
  CHECK((mean - white_noise(kQubits).matrix()).norm() < 0.1 * white_noise(kQubits).matrix().norm());

  std::mt19937_64 rng(5);
  for (Order o : {Order::AB, Order::BA}) {
    const ProcessMatrix v{random_ordered_process(kQubits, o, rng), kQubits};
    CHECK(validate_process(v.op, kQubits).passed);
    CHECK(is_causally_ordered(v, o).passed);
  }
}

TEST_CASE("witness of the reduced switch is nonnegative on separable processes") {
  const ProcessMatrix w = reduced_switch();
  const auto r = check_causal_separability(w);
  REQUIRE(std::holds_alternative<CausalWitness>(r));
  const auto &S = std::get<CausalWitness>(r);
  CHECK(S.value <= -1e-7);
  CHECK(expectation(w.op, S.S).real() == doctest::Approx(S.value).epsilon(1e-6));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto v = random_separable_process(w.structure, seed);
    CHECK(expectation(v.op, S.S).real() >= -1e-9);
  }
  CHECK(witness_minimum_over_sep(S, w.structure) >= -1e-7);
}

TEST_CASE("GYNI dimension bound") {
  CHECK(gyni_bound(16) == doctest::Approx(16.0 / 17.0));
  CHECK(gyni_bound(1) == doctest::Approx(0.5));
  double prev = 0;
  for (Index d = 1; d < 200; ++d) {
    CHECK(gyni_bound(d) > prev);
    CHECK(gyni_bound(d) < 1);
    prev = gyni_bound(d);
  }
  CHECK_THROWS(gyni_bound(0));
}

TEST_CASE("positivity lemma") {
  CHECK(std::abs(lemma_positivity_margin(max_entangled(AI, AO))) < 1e-12);

  std::mt19937_64 rng(9);
  const SpaceLabel X{"X", 4}, Y{"Y", 4};
  const LabeledOperator prod = tensor(on(X, wishart(4, rng)), on(Y, wishart(4, rng)));
  CHECK(lemma_positivity_margin(prod) >= 0);
  double worst = 1;
  for (int i = 0; i < 200; ++i)
    worst = std::min(worst, lemma_positivity_margin({TensorSpace{X, Y}, wishart(16, rng)}));
  CHECK(worst >= -1e-9);

  CHECK_THROWS(lemma_positivity_margin(on(AI, -MatrixC::Identity(2, 2))));
  CHECK_THROWS(lemma_positivity_margin(identity_on({AI, AO, BI})));
}

TEST_CASE("transpose criterion") {
  // real separable processes are invariant under partial transposition
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ProcessMatrix v = random_separable_process(kQubits, seed);
    v.op.matrix() = v.op.matrix().real().cast<cplx>();
    CHECK(transpose_criterion(v, 'A') == CriterionVerdict::applies);
  }

  // The traced switch is separable, but transposes in different bases differ by
  // a unitary conjugation and this one has eigenvalue -1/sqrt(2) in all of them.
  const LabeledOperator m = partial_trace(pure_switch(SwitchParams{}).op, {"CIt", "CIc"});
  const ProcessMatrix traced{m, PartyStructure::infer(m.space())};
  CHECK(min_eigenvalue(partial_transpose(m, {"BI", "BO"}).matrix()) ==
        doctest::Approx(-1 / std::sqrt(2.0)));
  CHECK(std::holds_alternative<CausalDecomposition>(check_causal_separability(traced)));
  CHECK(transpose_criterion(traced, 'B') == CriterionVerdict::silent);

  // the transpose of the identity channel is the swap, which is not positive
  CHECK(transpose_criterion(a_before_b(), 'A') == CriterionVerdict::silent);
  CHECK_THROWS(transpose_criterion(a_before_b(), 'C'));
}

TEST_CASE("transposed separable processes give causal SDI assemblages") {
  // W^{T_A} is separable by construction, W itself need not be
  std::mt19937_64 rng(21);
  int tested = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ProcessMatrix v = random_separable_process(kQubits, 40 + seed);
    const ProcessMatrix w{partial_transpose(v.op, {"AI", "AO"}), kQubits};
    if (!validate_process(w.op, kQubits).passed)
      continue;
    REQUIRE(transpose_criterion(w, 'A') == CriterionVerdict::applies);
    ++tested;
    for (int i = 0; i < 50; ++i) {
      Devices d;
      d.alice = random_instrument(2, 2, 2 + i % 2, 2 + i % 3, rng, "AI", "AO");
      CHECK(is_causal_assemblage(assemblage_from_process(w.op, d, Scenario::SDI)).causal);
    }
  }
  CHECK(tested > 0);
}
