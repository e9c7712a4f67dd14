#include "doctest.h"

#include "causalis/switch.hpp"

using namespace causalis;

namespace {

// Tr_rest[(1 (x) X) W] by explicit index sums, W on (kept, rest).
MatrixC dense_contract(const MatrixC &W, const MatrixC &X, Index kept) {
  const Index r = X.rows();
  MatrixC out = MatrixC::Zero(kept, kept);
  for (Index i = 0; i < kept; ++i)
    for (Index j = 0; j < kept; ++j)
      for (Index k = 0; k < r; ++k)
        for (Index l = 0; l < r; ++l)
          out(i, j) += X(k, l) * W(i * r + l, j * r + k);
  return out;
}

// Tr_front[(X (x) 1) W], W on (front, kept).
MatrixC dense_contract_front(const MatrixC &W, const MatrixC &X, Index kept) {
  const Index r = X.rows();
  MatrixC out = MatrixC::Zero(kept, kept);
  for (Index i = 0; i < kept; ++i)
    for (Index j = 0; j < kept; ++j)
      for (Index k = 0; k < r; ++k)
        for (Index l = 0; l < r; ++l)
          out(i, j) += X(k, l) * W(l * kept + i, k * kept + j);
  return out;
}

MatrixC kron_matrices(const MatrixC &a, const MatrixC &b) {
  return tensor(on({"x", a.rows()}, a), on({"y", b.rows()}, b)).matrix();
}

MatrixC random_state(Index d, std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  MatrixC x(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      x(i, j) = cplx(g(rng), g(rng));
  const MatrixC r = x * x.adjoint();
  return r / r.trace().real();
}

double max_element_error(const Assemblage &a, const Assemblage &b) {
  REQUIRE(a.elements.size() == b.elements.size());
  double e = 0;
  for (std::size_t i = 0; i < a.elements.size(); ++i)
    e = std::max(e, (a.elements[i].matrix() - b.elements[i].matrix()).cwiseAbs().maxCoeff());
  return e;
}

Devices untrusted_switch(Scenario s) {
  const auto sw = switch_instruments();
  switch (s) {
  case Scenario::TTU:
    return {std::nullopt, std::nullopt, sw.charlie};
  case Scenario::TUU:
    return {std::nullopt, sw.bob, sw.charlie};
  case Scenario::UTT:
    return {sw.alice, std::nullopt, std::nullopt};
  default:
    return {sw.alice, sw.bob, std::nullopt};
  }
}

// Causal assemblage with the switch shape: random ordered processes on the
// switch spaces under the switch instruments as untrusted devices.
Assemblage causal_switch_shaped(Scenario s, std::mt19937_64 &rng) {
  const TensorSpace space{{"AI", 2}, {"AO", 2}, {"BI", 2}, {"BO", 2}, {"CIc", 2}};
  const PartyStructure ps = PartyStructure::infer(space);
  const double q = std::uniform_real_distribution<double>(0, 1)(rng);
  const LabeledOperator W = q * random_ordered_process(ps, Order::ABC, rng) +
                            (1 - q) * random_ordered_process(ps, Order::BAC, rng);
  return assemblage_from_process(W, untrusted_switch(s), s);
}

} // namespace

TEST_CASE("scenario names round trip") {
  for (Scenario s : {Scenario::SDI, Scenario::TTU, Scenario::TUU, Scenario::UTT, Scenario::UUT})
    CHECK(scenario_from_string(to_string(s)) == s);
  CHECK(scenario_from_string("SDI-bipartite") == Scenario::SDI);
  CHECK_THROWS(scenario_from_string("TTT"));
}

TEST_CASE("switch TUU assemblage matches a dense trace") {
  const LabeledOperator W = reduced_switch().op;
  const auto sw = switch_instruments();
  const Assemblage w = switch_assemblage(Scenario::TUU);
  CHECK(w.settings == std::vector<Index>{2, 1});
  CHECK(w.outcomes == std::vector<Index>{2, 2});
  for (Index y = 0; y < 2; ++y)
    for (Index b = 0; b < 2; ++b)
      for (Index c = 0; c < 2; ++c) {
        const MatrixC X = kron_matrices(sw.bob(y, b).matrix(), sw.charlie(0, c).matrix());
        const MatrixC ref = dense_contract(W.matrix(), X, 4);
        CHECK((w({y, 0}, {b, c}).matrix() - ref).cwiseAbs().maxCoeff() < 1e-12);
      }
}

TEST_CASE("assemblage from an ordered process keeps the order") {
  std::mt19937_64 rng(3);
  const PartyStructure ps = PartyStructure::bipartite(2, 2, 2, 2);
  const LabeledOperator W = random_ordered_process(ps, Order::AB, rng);
  Devices u;
  u.alice = random_instrument(2, 2, 3, 2, rng);
  const Assemblage w = assemblage_from_process(W, u, Scenario::SDI);
  CHECK(validate_assemblage(w).passed);
  for (const auto &e : w.elements)
    CHECK(apply_identity(same_after("A first", {}, {"BO"}), e).matrix().norm() < 1e-12);
}

TEST_CASE("trivial output dimensions give a steering assemblage") {
  std::mt19937_64 rng(5);
  const PartyStructure ps = PartyStructure::bipartite(2, 1, 2, 1);
  const LabeledOperator W = random_process_matrix(ps, 9).op;
  Devices u;
  u.alice = random_instrument(2, 1, 2, 2, rng);
  const Assemblage w = assemblage_from_process(W, u, Scenario::SDI);
  // with one-dimensional outputs W is a state on AI BI
  for (Index x = 0; x < 2; ++x)
    for (Index a = 0; a < 2; ++a) {
      const MatrixC expect = dense_contract_front(W.matrix(), u.alice->elements[x][a].matrix(), 2);
      CHECK((w({x}, {a}).matrix() - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
  // and steering assemblages are always causal here
  CHECK(is_causal_assemblage(w).causal);
}

TEST_CASE("validity residuals") {
  const Assemblage np = nonprocess_assemblage_example();
  CHECK(validate_assemblage(np).passed);

  Assemblage noise = np;
  for (auto &e : noise.elements)
    e = (1.0 / 4) * identity_on(np.trusted);
  CHECK(validate_assemblage(noise).passed);

  Assemblage doubled = noise;
  for (auto &e : doubled.elements)
    e = 2.0 * e;
  const ResidualReport r = validate_assemblage(doubled);
  CHECK_FALSE(r.passed);
  CHECK(r.value("trace") == doctest::Approx(2.0));

  Assemblage bad = noise;
  bad.elements.pop_back();
  CHECK_THROWS(validate_assemblage(bad));
  Assemblage wrong = noise;
  wrong.scenario = Scenario::UUT;
  CHECK_THROWS(validate_assemblage(wrong));
}

TEST_CASE("the nonprocess example gives two-way signalling") {
  const Assemblage w = nonprocess_assemblage_example();
  std::vector<std::vector<MatrixC>> m(2, std::vector<MatrixC>(2));
  for (Index y = 0; y < 2; ++y)
    for (Index b = 0; b < 2; ++b) {
      MatrixC e = MatrixC::Zero(4, 4);
      e(b * 2 + y, b * 2 + y) = 1;
      m[y][b] = e;
    }
  Devices t;
  t.bob = InstrumentSet({"BI", 2}, {"BO", 2}, m);
  CHECK(validate_instruments(*t.bob).passed);
  const Behaviour p = behaviour_of(w, t);
  CHECK(max_abs_difference(p, two_way_signalling()) < 1e-12);
  CHECK(gyni_success(p) == doctest::Approx(1.0));
  for (Index d : {2, 4, 16})
    CHECK(gyni_success(p) > gyni_bound(d));

  const auto c = is_causal_assemblage(w);
  REQUIRE_FALSE(c.causal);
  CHECK(c.witness->value < 0);
}

TEST_CASE("switch assemblages: noncausal except UUT") {
  std::mt19937_64 rng(11);
  for (Scenario s : {Scenario::TTU, Scenario::TUU, Scenario::UTT}) {
    CAPTURE(to_string(s));
    const Assemblage w = switch_assemblage(s);
    CHECK(validate_assemblage(w).passed);
    const auto c = is_causal_assemblage(w);
    REQUIRE_FALSE(c.causal);
    CHECK(c.outer_approximation == (s != Scenario::TTU));
    CHECK(c.witness->value < 0);
    CHECK(witness_value(*c.witness, w) == doctest::Approx(c.witness->value));
    // nonnegative on causal assemblages of the same shape
    for (int k = 0; k < 10; ++k)
      CHECK(witness_value(*c.witness, causal_switch_shaped(s, rng)) > -1e-7);
  }
  const Assemblage uut = switch_assemblage(Scenario::UUT);
  const auto c = is_causal_assemblage(uut);
  REQUIRE(c.causal);
  CHECK(c.outer_approximation);
  CHECK(verify_assemblage_decomposition(uut, *c.decomposition).worst() < 1e-7);
}

TEST_CASE("assemblages of separable processes are causal") {
  for (Scenario s : {Scenario::SDI, Scenario::TTU, Scenario::TUU, Scenario::UTT, Scenario::UUT})
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      CAPTURE(to_string(s));
      CAPTURE(seed);
      const bool heavy = s == Scenario::TTU;
      if (heavy && seed > 0)
        continue;
      const auto sample = random_causal_assemblage(s, 100 + seed, heavy ? 2 : 3);
      CHECK(validate_assemblage(sample.assemblage).passed);
      CHECK(verify_assemblage_decomposition(sample.assemblage, sample.decomposition).worst() < 1e-10);
      const auto c = is_causal_assemblage(sample.assemblage);
      REQUIRE(c.causal);
      CHECK(verify_assemblage_decomposition(sample.assemblage, *c.decomposition).worst() < 1e-7);
    }
}

TEST_CASE("realizations reproduce causal assemblages") {
  for (Scenario s : {Scenario::SDI, Scenario::TTU, Scenario::UUT})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CAPTURE(to_string(s));
      CAPTURE(seed);
      const auto sample = random_causal_assemblage(s, 200 + seed);
      const auto r = realize_causal_assemblage(sample.assemblage, sample.decomposition);
      const Assemblage back = assemblage_from_process(r.W, r.untrusted, s);
      CHECK(max_element_error(back, sample.assemblage) < 1e-9);
      const ProcessMatrix W{r.W, r.structure};
      CHECK(validate_process(r.W, r.structure).worst() < 1e-9);
      CHECK(verify_decomposition(W, r.decomposition).worst() < 1e-9);
      if (r.untrusted.alice)
        CHECK(validate_instruments(*r.untrusted.alice).passed);
      if (r.untrusted.bob)
        CHECK(validate_instruments(*r.untrusted.bob).passed);
      if (r.untrusted.charlie)
        CHECK(validate_instruments(*r.untrusted.charlie).passed);
    }
}

TEST_CASE("signalling SDI assemblage is realized with Alice first") {
  std::mt19937_64 rng(21);
  Assemblage w;
  w.scenario = Scenario::SDI;
  w.trusted = TensorSpace{{"BI", 2}, {"BO", 2}};
  w.settings = {2};
  w.outcomes = {2};
  // sigma_{a|x} = p(a|x) rho_{a|x} with an x-dependent sum
  for (Index x = 0; x < 2; ++x) {
    const double p0 = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    for (Index a = 0; a < 2; ++a)
      w.elements.emplace_back(w.trusted, kron_matrices((a == 0 ? p0 : 1 - p0) * random_state(2, rng),
                                                       MatrixC::Identity(2, 2)));
  }
  CHECK(validate_assemblage(w).passed);
  const auto c = is_causal_assemblage(w);
  REQUIRE(c.causal);
  CHECK(c.decomposition->q > 0.1);
  const auto r = realize_causal_assemblage(w, *c.decomposition);
  CHECK(max_element_error(assemblage_from_process(r.W, r.untrusted, Scenario::SDI), w) < 1e-7);
  // Alice holds sigma^T on the A-first level of her input
  const Index top = r.untrusted.alice->input.dim - 1;
  for (Index x = 0; x < 2; ++x)
    for (Index a = 0; a < 2; ++a) {
      const LabeledOperator &A = r.untrusted.alice->elements[x][a];
      const Index n = A.matrix().rows() / r.untrusted.alice->input.dim;
      const MatrixC block = A.matrix().block(top * n, top * n, n, n);
      const MatrixC sigma =
          partial_trace(c.decomposition->first[w.flat({x}, {a})], {"BO"}).matrix() / 2.0;
      CHECK((block * r.decomposition.q - sigma.transpose()).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("general TTU realization") {
  for (double eta : {0.0, 0.3}) {
    const Assemblage w = switch_assemblage(Scenario::TTU, eta);
    const auto r = realize_ttu_assemblage(w);
    CHECK(max_element_error(assemblage_from_process(r.W, r.untrusted, Scenario::TTU), w) < 1e-9);
    CHECK(validate_process(r.W, r.structure).worst() < 1e-9);
    CHECK(validate_instruments(*r.untrusted.charlie).passed);
  }
  CHECK_THROWS(realize_ttu_assemblage(switch_assemblage(Scenario::UUT)));
}

TEST_CASE("realization is refused where none is known") {
  CHECK_THROWS_AS(realize_causal_assemblage(switch_assemblage(Scenario::TUU, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(realize_causal_assemblage(switch_assemblage(Scenario::UTT, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS(realize_causal_assemblage(nonprocess_assemblage_example()));
}

TEST_CASE("realization from the solver's decomposition") {
  const Assemblage w = switch_assemblage(Scenario::UUT);
  const auto r = realize_causal_assemblage(w);
  CHECK(max_element_error(assemblage_from_process(r.W, r.untrusted, Scenario::UUT), w) < 1e-8);
  CHECK(verify_decomposition({r.W, r.structure}, r.decomposition).worst() < 1e-8);
}

TEST_CASE("certify_sdi on the switch") {
  const Behaviour p = switch_behaviour();

  const auto ttu = certify_sdi(p, switch_trusted(Scenario::TTU), Scenario::TTU);
  CHECK(ttu.verdict == Verdict::certified_noncausal);
  CHECK(ttu.value < 0);
  CHECK(inequality_value(*ttu.functional, p) == doctest::Approx(ttu.value));

  const auto uut = certify_sdi(p, switch_trusted(Scenario::UUT), Scenario::UUT);
  CHECK(uut.verdict == Verdict::not_certified);
  REQUIRE(uut.assemblage);
  CHECK(max_abs_difference(behaviour_of(*uut.assemblage, switch_trusted(Scenario::UUT)), p) < 1e-7);

  // the switch instruments as trusted devices see too little of the TUU and UTT
  // assemblages; a consistent causal assemblage exists
  for (Scenario s : {Scenario::TUU, Scenario::UTT})
    CHECK(certify_sdi(p, switch_trusted(s), s).verdict == Verdict::not_certified);

  // with tomographically complete trusted devices both are certified
  const auto sw = switch_instruments();
  const LabeledOperator W = reduced_switch().op;
  const InstrumentSet At = tomographic_instruments(2, 2);
  const auto tuu = certify_sdi(born(W, At, sw.bob, sw.charlie), Devices{At, std::nullopt, std::nullopt},
                               Scenario::TUU);
  CHECK(tuu.verdict == Verdict::certified_noncausal);
  const InstrumentSet Bt = tomographic_instruments(2, 2, "BI", "BO");
  const auto utt = certify_sdi(born(W, sw.alice, Bt, sw.charlie), Devices{std::nullopt, Bt, sw.charlie},
                               Scenario::UTT);
  CHECK(utt.verdict == Verdict::certified_noncausal);
}

TEST_CASE("certified functionals are nonnegative on causal data") {
  const Behaviour p = switch_behaviour();
  const Devices t = switch_trusted(Scenario::TTU);
  const auto r = certify_sdi(p, t, Scenario::TTU);
  REQUIRE(r.functional);
  std::mt19937_64 rng(8);
  for (int k = 0; k < 10; ++k) {
    const Assemblage w = causal_switch_shaped(Scenario::TTU, rng);
    CHECK(inequality_value(*r.functional, behaviour_of(w, t)) > -1e-7);
  }
}

TEST_CASE("white noise is never certified") {
  const Behaviour p = switch_behaviour(1.0);
  for (Scenario s : {Scenario::TTU, Scenario::TUU, Scenario::UTT, Scenario::UUT})
    CHECK(certify_sdi(p, switch_trusted(s), s).verdict == Verdict::not_certified);
  std::mt19937_64 rng(2);
  Devices t;
  t.bob = random_instrument(2, 2, 2, 2, rng, "BI", "BO");
  Assemblage noise = nonprocess_assemblage_example();
  for (auto &e : noise.elements)
    e = 0.25 * identity_on(noise.trusted);
  CHECK(certify_sdi(behaviour_of(noise, t), t, Scenario::SDI).verdict == Verdict::not_certified);
}

TEST_CASE("behaviours no assemblage explains are flagged") {
  // Bob's device ignores y, yet the data has b = y
  std::vector<std::vector<MatrixC>> m(2, std::vector<MatrixC>(2));
  for (Index y = 0; y < 2; ++y)
    for (Index b = 0; b < 2; ++b) {
      MatrixC e = MatrixC::Zero(4, 4);
      e(b * 2, b * 2) = 1;
      m[y][b] = e;
    }
  Devices t;
  t.bob = InstrumentSet({"BI", 2}, {"BO", 2}, m);
  Behaviour p({2, 2}, {2, 2});
  for (Index x = 0; x < 2; ++x)
    for (Index y = 0; y < 2; ++y)
      p({x, y}, {0, y}) = 1;
  CHECK(certify_sdi(p, t, Scenario::SDI).verdict == Verdict::inconsistent_behaviour);
}

TEST_CASE("two-way signalling from the nonprocess example is certified") {
  std::vector<std::vector<MatrixC>> m(2, std::vector<MatrixC>(2));
  for (Index y = 0; y < 2; ++y)
    for (Index b = 0; b < 2; ++b) {
      MatrixC e = MatrixC::Zero(4, 4);
      e(b * 2 + y, b * 2 + y) = 1;
      m[y][b] = e;
    }
  Devices t;
  t.bob = InstrumentSet({"BI", 2}, {"BO", 2}, m);
  const auto r = certify_sdi(two_way_signalling(), t, Scenario::SDI);
  CHECK(r.verdict == Verdict::certified_noncausal);
}

TEST_CASE("scenario mismatches are rejected") {
  const Behaviour p = switch_behaviour();
  CHECK_THROWS(certify_sdi(p, switch_trusted(Scenario::TTU), Scenario::UUT));
  CHECK_THROWS(certify_sdi(p, Devices{}, Scenario::SDI));
  Assemblage w = switch_assemblage(Scenario::TUU);
  w.scenario = Scenario::UTT;
  CHECK_THROWS(is_causal_assemblage(w));
  CHECK_THROWS(assemblage_from_process(reduced_switch().op, Devices{}, Scenario::TTU));
}
