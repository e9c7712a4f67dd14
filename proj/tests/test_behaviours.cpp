#include "causalis/behaviours.hpp"

#include "doctest.h"

#include <set>

using namespace causalis;

namespace {

InstrumentSet scaled_identity_channels(const std::string &in, const std::string &out) {
  const MatrixC phi = max_entangled({in, 2}, {out, 2}).matrix();
  return InstrumentSet({in, 2}, {out, 2}, {{0.5 * phi, 0.5 * phi}, {0.5 * phi, 0.5 * phi}});
}

ProcessMatrix w_ab() {
  // 1^{AI}/2 (x) Phi+^{AO BI} (x) 1^{BO}
  const SpaceLabel AI{"AI", 2}, AO{"AO", 2}, BI{"BI", 2}, BO{"BO", 2};
  auto w = tensor(on(AI, MatrixC::Identity(2, 2) / 2.0), max_entangled(AO, BI),
                  on(BO, MatrixC::Identity(2, 2)));
  return {w, PartyStructure::bipartite(2, 2, 2, 2)};
}

double check_round_trip(const CausalBehaviourDecomposition &d) {
  const auto r = realize_causal_behaviour(d);
  const Behaviour back = r.C ? born(r.W, r.A, r.B, *r.C) : born(r.W, r.A, r.B);
  CHECK(validate_instruments(r.A).passed);
  CHECK(validate_instruments(r.B).passed);
  if (r.C)
    CHECK(validate_instruments(*r.C).passed);
  const auto dec = verify_decomposition({r.W, r.structure}, r.decomposition, false);
  CHECK(dec.passed);
  return max_abs_difference(back, mix(d));
}

} // namespace

TEST_CASE("deterministic strategy counts") {
  auto s = enumerate_deterministic_causal({2, 2}, {2, 2});
  CHECK(s.size() == 128);
  CHECK(std::count_if(s.begin(), s.end(), [](auto &x) { return x.order == Order::AB; }) == 64);
  CHECK(enumerate_deterministic_causal({1, 1}, {1, 1}).size() == 2);
  CHECK(deterministic_strategy_count({2, 2, 1}, {2, 2, 2}) == 2.0 * 4 * 16 * 16);
  CHECK(deterministic_strategy_count({2, 2, 2}, {2, 2, 2}) == 2.0 * 4 * 16 * 256);
  CHECK_THROWS_AS(enumerate_deterministic_causal({3, 3, 3}, {3, 3, 3}), ExplosionGuard);
  try {
    enumerate_deterministic_causal({4, 4}, {4, 4});
  } catch (const ExplosionGuard &e) {
    CHECK(e.count == deterministic_strategy_count({4, 4}, {4, 4}));
  }
}

TEST_CASE("enumeration is lexicographic and duplicate free") {
  auto s = enumerate_deterministic_causal({2, 2}, {2, 2});
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto b = s[i].behaviour({2, 2}, {2, 2});
    CHECK(validate_behaviour(b).passed);
    seen.insert(b.p);
    if (i > 0 && s[i].order == s[i - 1].order) {
      auto key = [](const DeterministicCausalStrategy &d) {
        auto k = d.first;
        k.insert(k.end(), d.second.begin(), d.second.end());
        return k;
      };
      CHECK(key(s[i - 1]) < key(s[i]));
    }
  }
  // strategies of the two orders coincide when nobody signals
  CHECK(seen.size() < s.size());
  CHECK(s.front().order == Order::AB);
  CHECK(s.back().order == Order::BA);
}

TEST_CASE("deterministic behaviours are causal vertices") {
  auto s = enumerate_deterministic_causal({2, 2}, {2, 2});
  for (std::size_t i : {std::size_t(0), std::size_t(37), std::size_t(101)}) {
    auto r = is_causal_behaviour(s[i].behaviour({2, 2}, {2, 2}));
    CHECK(r.causal);
    CHECK(max_abs_difference(mix(*r.decomposition), s[i].behaviour({2, 2}, {2, 2})) <= 1e-8);
  }
}

TEST_CASE("two-way signalling is noncausal") {
  const Behaviour p = two_way_signalling();
  CHECK(gyni_success(p) == doctest::Approx(1.0));
  auto r = is_causal_behaviour(p);
  REQUIRE_FALSE(r.causal);
  REQUIRE(r.inequality);
  CHECK(r.violation >= 1e-6);
  CHECK(inequality_value(*r.inequality, p) < 0);
  for (const auto &s : enumerate_deterministic_causal({2, 2}, {2, 2}))
    CHECK(inequality_value(*r.inequality, s.behaviour({2, 2}, {2, 2})) >= -1e-9);
  auto di = certify_di(p);
  CHECK(di.verdict == Verdict::certified_noncausal);
}

TEST_CASE("GYNI values") {
  CHECK(gyni_success(uniform_behaviour({2, 2}, {2, 2})) == doctest::Approx(0.25));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto p = mix(random_causal_decomposition({2, 2}, {2, 2}, seed));
    CHECK(gyni_success(p) <= 0.5 + 1e-9);
  }
  CHECK_THROWS(gyni_success(uniform_behaviour({3, 2}, {2, 2})));
}

TEST_CASE("behaviour validation and normalization") {
  Behaviour p = uniform_behaviour({2, 2}, {2, 2});
  p.p[0] += 5e-10;
  CHECK(validate_behaviour(normalized(p)).value("normalization") <= 1e-15);
  p.p[0] += 1e-3;
  CHECK_THROWS(normalized(p));
  Behaviour t = uniform_behaviour({1, 1, 2}, {2, 2, 2});
  t({0, 0, 1}, {0, 0, 0}) += 0.1;
  t({0, 0, 1}, {1, 1, 0}) -= 0.1;
  CHECK(validate_behaviour(t).value("charlie last") == doctest::Approx(0.1));
}

TEST_CASE("born on white noise factorizes") {
  std::mt19937_64 rng(3);
  auto A = random_instrument(2, 2, 2, 2, rng, "AI", "AO");
  auto B = random_instrument(2, 2, 2, 3, rng, "BI", "BO");
  auto s = PartyStructure::bipartite(2, 2, 2, 2);
  auto p = born(white_noise(s), A, B);
  CHECK(validate_behaviour(p).passed);
  for (Index x = 0; x < 2; ++x)
    for (Index y = 0; y < 2; ++y)
      for (Index a = 0; a < 2; ++a)
        for (Index b = 0; b < 3; ++b) {
          const double pa = A(x, a).trace().real() / 2.0;
          const double pb = B(y, b).trace().real() / 2.0;
          CHECK(p({x, y}, {a, b}) == doctest::Approx(pa * pb).epsilon(1e-12));
        }
}

TEST_CASE("born matches a dense trace oracle") {
  std::mt19937_64 rng(5);
  auto A = random_instrument(2, 2, 2, 2, rng, "AI", "AO");
  auto B = random_instrument(2, 2, 2, 2, rng, "BI", "BO");
  auto W = random_process_matrix(PartyStructure::bipartite(2, 2, 2, 2), 9);
  auto p = born(W.op, A, B);
  for (Index x = 0; x < 2; ++x)
    for (Index y = 0; y < 2; ++y)
      for (Index a = 0; a < 2; ++a)
        for (Index b = 0; b < 2; ++b) {
          const MatrixC k = tensor(A(x, a), B(y, b)).matrix();
          CHECK(std::abs(p({x, y}, {a, b}) - (k * W.op.matrix()).trace().real()) <= 1e-12);
        }
}

TEST_CASE("pure A before B realization matches the explicit construction") {
  std::mt19937_64 rng(11);
  CausalBehaviourDecomposition d{1.0, random_ordered_behaviour({2, 2}, {2, 2}, Order::AB, rng),
                                 uniform_behaviour({2, 2}, {2, 2})};
  auto r = realize_causal_behaviour(d);
  CHECK(r.W.space().dim_of("AI") == 1);
  CHECK(r.W.space().dim_of("AO") == 4);
  CHECK(r.W.space().dim_of("BI") == 4);
  CHECK(is_causally_ordered({r.W, r.structure}, Order::AB).passed);
  CHECK(validate_process(r.W, r.structure).passed);
  CHECK(max_abs_difference(born(r.W, r.A, r.B), d.first) <= 1e-12);
  // a fixed W^{A<B} with suitable instruments reproduces a deterministic behaviour
  auto wab = w_ab();
  CHECK(validate_process(wab.op, wab.structure).passed);
  CHECK(is_causally_ordered(wab, Order::AB).passed);
  CHECK_FALSE(is_causally_ordered(wab, Order::BA).passed);
}

TEST_CASE("bipartite realizations round trip") {
  SUBCASE("half mixture puts the orders on complementary input subspaces") {
    auto s = enumerate_deterministic_causal({2, 2}, {2, 2});
    CausalBehaviourDecomposition d{0.5, s[5].behaviour({2, 2}, {2, 2}),
                                   s[64 + 9].behaviour({2, 2}, {2, 2})};
    auto r = realize_causal_behaviour(d);
    CHECK(r.W.space().dim_of("AI") == 5);
    CHECK(r.W.space().dim_of("BI") == 5);
    CHECK(max_abs_difference(born(r.W, r.A, r.B), mix(d)) <= 1e-12);
    auto v = verify_decomposition({r.W, r.structure}, r.decomposition);
    CHECK(v.passed);
    CHECK(r.decomposition.q == 0.5);
    CHECK(validate_process(r.W, r.structure).passed);
  }
  SUBCASE("q = 0 keeps only B before A") {
    std::mt19937_64 rng(2);
    CausalBehaviourDecomposition d{0.0, uniform_behaviour({2, 2}, {2, 2}),
                                   random_ordered_behaviour({2, 2}, {2, 2}, Order::BA, rng)};
    auto r = realize_causal_behaviour(d);
    CHECK(r.W.space().dim_of("AI") == 4);
    CHECK(is_causally_ordered({r.W, r.structure}, Order::BA).passed);
    CHECK(max_abs_difference(born(r.W, r.A, r.B), d.second) <= 1e-12);
  }
  SUBCASE("random mixtures of uneven shapes") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto d = random_causal_decomposition({2, 3}, {2, 2}, seed);
      CHECK(check_round_trip(d) <= 1e-9);
    }
  }
  SUBCASE("rejects unordered components") {
    CausalBehaviourDecomposition d{0.5, two_way_signalling(), uniform_behaviour({2, 2}, {2, 2})};
    CHECK_THROWS(realize_causal_behaviour(d));
  }
}

TEST_CASE("tripartite realizations round trip") {
  SUBCASE("deterministic A<B<C") {
    auto s = enumerate_deterministic_causal({2, 2, 1}, {2, 2, 2});
    auto p = s[777].behaviour({2, 2, 1}, {2, 2, 2});
    CHECK(check_round_trip({1.0, p, uniform_behaviour({2, 2, 1}, {2, 2, 2})}) <= 1e-12);
  }
  SUBCASE("uniform") {
    auto u = uniform_behaviour({2, 2, 2}, {2, 2, 2});
    CHECK(check_round_trip({0.3, u, u}) <= 1e-12);
  }
  SUBCASE("random mixtures") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto d = random_causal_decomposition({2, 2, 1}, {2, 2, 2}, 100 + seed);
      CHECK(check_round_trip(d) <= 1e-9);
    }
  }
}

TEST_CASE("born of separable processes is LP causal") {
  const auto s = PartyStructure::bipartite(2, 2, 2, 2);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    auto A = random_instrument(2, 2, 2, 2, rng, "AI", "AO");
    auto B = random_instrument(2, 2, 2, 2, rng, "BI", "BO");
    auto W = random_separable_process(s, seed);
    auto r = is_causal_behaviour(born(W.op, A, B));
    CHECK(r.causal);
    CHECK(gyni_success(born(W.op, A, B)) <= 0.5 + 1e-9);
  }
}

TEST_CASE("tripartite membership program") {
  auto d = random_causal_decomposition({2, 2, 1}, {2, 2, 2}, 4);
  auto r = is_causal_behaviour(mix(d));
  REQUIRE(r.causal);
  CHECK(max_abs_difference(mix(*r.decomposition), mix(d)) <= 1e-7);
}

TEST_CASE("device-independent verdicts carry realizations") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Behaviour p = mix(random_causal_decomposition({2, 2}, {2, 2}, 40 + seed));
    auto r = certify_di(p);
    REQUIRE(r.verdict == Verdict::not_certified);
    REQUIRE(r.realization);
    CHECK(max_abs_difference(born(r.realization->W, r.realization->A, r.realization->B), p) <=
          1e-7);
  }
}

TEST_CASE("device-dependent verdicts") {
  const auto sw = switch_instruments();
  const auto s = PartyStructure::bipartite(2, 2, 2, 2);
  SUBCASE("white noise is not certified") {
    auto p = born(white_noise(s), sw.alice, sw.bob);
    auto r = certify_dd(p, sw.alice, sw.bob);
    CHECK(r.verdict == Verdict::not_certified);
    REQUIRE(r.W_sep);
    CHECK(max_abs_difference(born(*r.W_sep, sw.alice, sw.bob), p) <= 1e-7);
  }
  SUBCASE("two-way signalling is inconsistent with any process") {
    auto r = certify_dd(two_way_signalling(), sw.alice, sw.bob);
    CHECK(r.verdict == Verdict::inconsistent_behaviour);
    REQUIRE(r.functional);
    CHECK(inequality_value(*r.functional, two_way_signalling()) < 0);
  }
}

TEST_CASE("GYNI over processes respects the dimension bound") {
  const auto sw = switch_instruments();
  const double v = max_gyni_over_processes(sw.alice, sw.bob);
  CHECK(v <= gyni_bound(16) + 1e-6);
  CHECK(v >= 0.25);
  CHECK(max_gyni_over_processes(sw.alice, sw.bob, true) <= 0.5 + 1e-6);
  const double flat = max_gyni_over_processes(scaled_identity_channels("AI", "AO"),
                                              scaled_identity_channels("BI", "BO"));
  CHECK(flat == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("tomographic reconstruction") {
  auto A = tomographic_instruments(2, 2, "AI", "AO");
  auto B = tomographic_instruments(2, 2, "BI", "BO");
  CHECK(born_map_min_singular_value(A, B) > 1e-3);
  const auto s = PartyStructure::bipartite(2, 2, 2, 2);
  auto wn = white_noise(s);
  CHECK((reconstruct_process(born(wn, A, B), A, B) - wn).matrix().norm() <= 1e-10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto W = random_process_matrix(s, 500 + seed);
    auto R = reconstruct_process(born(W.op, A, B), A, B);
    CHECK((R - W.op).matrix().norm() <= 1e-8);
  }
}
