#include "doctest.h"

#include "causalis/switch.hpp"

using namespace causalis;

namespace {

Index numeric_rank(const MatrixC &m, double tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<MatrixC> es(m);
  Index r = 0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i)
    r += es.eigenvalues()(i) > tol;
  return r;
}

bool separable(const ProcessMatrix &w) {
  return std::holds_alternative<CausalDecomposition>(check_causal_separability(w));
}

// Independent cvxpy oracles, frozen.
constexpr double kOracleTTT = 0.611805;
constexpr double kOracleTTU = 0.568702;
constexpr double kOracleTUU = 0.162130;
constexpr double kOracleUTT = 0.180176;

} // namespace

TEST_CASE("pure switch is a valid rank one process") {
  const ProcessMatrix w = pure_switch(SwitchParams{});
  CHECK(w.op.space().names() == LabelSet{"AI", "AO", "BI", "BO", "CIt", "CIc"});
  CHECK(w.op.trace().real() == doctest::Approx(4.0));
  CHECK(numeric_rank(w.op.matrix()) == 1);
  CHECK(validate_process(w.op, w.structure).passed);

  SwitchParams qutrit;
  qutrit.psi = Eigen::VectorXcd::Unit(3, 1);
  const ProcessMatrix w3 = pure_switch(qutrit);
  CHECK(w3.op.trace().real() == doctest::Approx(9.0));
  CHECK(validate_process(w3.op, w3.structure).passed);

  SwitchParams bad;
  bad.alpha = 1.0;
  CHECK_THROWS(pure_switch(bad));
  bad = SwitchParams{};
  bad.psi = Eigen::VectorXcd::Ones(2);
  CHECK_THROWS(pure_switch(bad));
}

TEST_CASE("pure switch branches are causally ordered") {
  SwitchParams p;
  p.alpha = 1;
  p.beta = 0;
  CHECK(is_causally_ordered(pure_switch(p), Order::ABC).passed);
  CHECK_FALSE(is_causally_ordered(pure_switch(p), Order::BAC).passed);
  p.alpha = 0;
  p.beta = 1;
  CHECK(is_causally_ordered(pure_switch(p), Order::BAC).passed);
  CHECK_FALSE(is_causally_ordered(pure_switch(p), Order::ABC).passed);
}

TEST_CASE("reduced switch") {
  const ProcessMatrix w = reduced_switch();
  CHECK(w.op.space().names() == LabelSet{"AI", "AO", "BI", "BO", "CIc"});
  CHECK(w.op.dim() == 32);
  CHECK(numeric_rank(w.op.matrix()) == 2);
  CHECK(validate_process(w.op, w.structure).passed);

  const auto r = check_causal_separability(w);
  REQUIRE(std::holds_alternative<CausalWitness>(r));
  const CausalWitness &S = std::get<CausalWitness>(r);
  CHECK(S.value < 0);
  CHECK(expectation(w.op, S.S).real() == doctest::Approx(S.value).epsilon(1e-6));
  // the witness is linear, so it also flags the mixture with half noise
  CHECK(expectation(noisy_reduced_switch(0.5).op, S.S).real() < 0);
  CHECK(expectation(white_noise(w.structure), S.S).real() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("marginal of the switch is separable with q = |alpha|^2") {
  for (double a2 : {0.0, 0.25, 0.5, 1.0}) {
    CAPTURE(a2);
    SwitchParams p;
    p.alpha = std::sqrt(a2);
    p.beta = std::sqrt(1 - a2);
    const LabeledOperator m = partial_trace(pure_switch(p).op, {"CIt", "CIc"});
    const ProcessMatrix w{m, PartyStructure::infer(m.space())};
    const auto r = check_causal_separability(w);
    REQUIRE(std::holds_alternative<CausalDecomposition>(r));
    CHECK(std::get<CausalDecomposition>(r).q == doctest::Approx(a2).epsilon(1e-6));
  }
}

TEST_CASE("noisy switch") {
  CHECK((noisy_reduced_switch(0).op - reduced_switch().op).matrix().cwiseAbs().maxCoeff() == 0);
  const ProcessMatrix one = noisy_reduced_switch(1);
  CHECK((one.op.matrix() - MatrixC::Identity(32, 32) / 8.0).cwiseAbs().maxCoeff() < 1e-15);
  CausalDecomposition half{0.5, 0.5 * one.op, 0.5 * one.op, 0};
  CHECK(verify_decomposition(one, half).worst() < 1e-12);
  for (double eta : {0.0, 0.3, 0.7, 1.0})
    CHECK(validate_process(noisy_reduced_switch(eta).op, one.structure).passed);
  CHECK_THROWS(noisy_reduced_switch(-0.1));
  CHECK_THROWS(noisy_reduced_switch(1.5));
}

TEST_CASE("scenario names") {
  for (SwitchScenario s : kSwitchScenarios)
    CHECK(switch_scenario_from_string(to_string(s)) == s);
  CHECK_THROWS(switch_scenario_from_string("TUT"));
  CHECK(std::string(to_string(BoundKind::lower_bound)) == "lower-bound");
}

TEST_CASE("robustness in the semi-device-independent scenarios") {
  const auto ttu = robustness(SwitchScenario::TTU);
  const auto tuu = robustness(SwitchScenario::TUU);
  const auto utt = robustness(SwitchScenario::UTT);
  const auto uut = robustness(SwitchScenario::UUT);

  CHECK(ttu.eta_star == doctest::Approx(kOracleTTU).epsilon(2e-6 / kOracleTTU));
  CHECK(tuu.eta_star == doctest::Approx(kOracleTUU).epsilon(2e-6 / kOracleTUU));
  CHECK(utt.eta_star == doctest::Approx(kOracleUTT).epsilon(2e-6 / kOracleUTT));
  CHECK(std::abs(ttu.eta_star - 0.5687) < 5e-4);
  CHECK(std::abs(tuu.eta_star - 0.1621) < 5e-4);
  CHECK(std::abs(utt.eta_star - 0.1802) < 5e-4);
  CHECK(std::abs(uut.eta_star) < 1e-6);

  for (const auto *r : {&ttu, &tuu, &utt}) {
    CHECK(r->bound_kind == BoundKind::lower_bound);
    CHECK(r->residuals.worst() < 1e-7);
  }
  CHECK(uut.bound_kind == BoundKind::exact);
  CHECK_FALSE(ttu.outer_approximation);
  CHECK(tuu.outer_approximation);
  CHECK(tuu.eta_star < utt.eta_star);
  CHECK(utt.eta_star < ttu.eta_star);
}

TEST_CASE("membership is monotone in eta around the critical value") {
  for (SwitchScenario ss : {SwitchScenario::TUU, SwitchScenario::UTT, SwitchScenario::TTU}) {
    CAPTURE(to_string(ss));
    const Scenario s = ss == SwitchScenario::TUU   ? Scenario::TUU
                       : ss == SwitchScenario::UTT ? Scenario::UTT
                                                   : Scenario::TTU;
    const double star = robustness(ss).eta_star;
    CHECK(is_causal_assemblage(switch_assemblage(s, star + 1e-4)).causal);
    CHECK_FALSE(is_causal_assemblage(switch_assemblage(s, star - 1e-4)).causal);
    for (double eta : {0.0, 0.25, 0.5, 0.75, 1.0})
      CHECK(is_causal_assemblage(switch_assemblage(s, eta)).causal == (eta > star));
  }
}

TEST_CASE("device-dependent and device-independent robustness") {
  const auto ttt = robustness(SwitchScenario::TTT);
  CHECK(ttt.eta_star == doctest::Approx(kOracleTTT).epsilon(2e-6 / kOracleTTT));
  CHECK(std::abs(ttt.eta_star - 0.6118) < 5e-4);
  CHECK(ttt.bound_kind == BoundKind::exact);
  CHECK(ttt.residuals.worst() < 1e-7);
  REQUIRE(ttt.process_decomposition);
  CHECK(verify_decomposition(noisy_reduced_switch(ttt.eta_star), *ttt.process_decomposition)
            .worst() < 1e-7);
  CHECK_FALSE(separable(noisy_reduced_switch(ttt.eta_star - 1e-4)));

  const auto uuu = robustness(SwitchScenario::UUU);
  CHECK(std::abs(uuu.eta_star) < 1e-6);
  CHECK(uuu.bound_kind == BoundKind::exact);
  CHECK(uuu.residuals.worst() < 1e-7);
  CHECK(is_causal_behaviour(switch_behaviour()).causal);
}

TEST_CASE("UUT assemblages of the switch are causal") {
  const UUTVerification v = verify_uut_causality(6, 17);
  CHECK(v.trials.size() == 6);
  CHECK(v.all_causal);
  CHECK(v.worst_slack >= -1e-7);
  CHECK(v.worst_residual < 1e-7);
  bool conj = false, grained = false;
  for (const auto &t : v.trials) {
    conj = conj || t.instruments == "conjugated";
    grained = grained || t.instruments == "coarse-grained";
  }
  CHECK((conj && grained));
  CHECK_THROWS(verify_uut_causality(0, 1));
}

TEST_CASE("causal decomposition built from the behaviour decomposition") {
  // w_ab|xy = q p1(ab|xy) rho_ab|xy + (1-q) p2(ab|xy) rho_ab|xy
  const Assemblage w = switch_assemblage(Scenario::UUT);
  Behaviour p({2, 2}, {2, 2});
  for (Index x = 0; x < 2; ++x)
    for (Index y = 0; y < 2; ++y)
      for (Index a = 0; a < 2; ++a)
        for (Index b = 0; b < 2; ++b)
          p({x, y}, {a, b}) = w({x, y}, {a, b}).trace().real();
  const auto c = is_causal_behaviour(p);
  REQUIRE(c.causal);
  const auto &d = *c.decomposition;
  AssemblageDecomposition ad{d.q, {}, {}};
  for (Index x = 0; x < 2; ++x)
    for (Index y = 0; y < 2; ++y)
      for (Index a = 0; a < 2; ++a)
        for (Index b = 0; b < 2; ++b) {
          const LabeledOperator &e = w({x, y}, {a, b});
          const double t = e.trace().real();
          const LabeledOperator rho = t > 0 ? (1.0 / t) * e : LabeledOperator::zero(e.space());
          ad.first.push_back(d.q * d.first({x, y}, {a, b}) * rho);
          ad.second.push_back((1 - d.q) * d.second({x, y}, {a, b}) * rho);
        }
  CHECK(verify_assemblage_decomposition(w, ad).worst() < 1e-7);
}
