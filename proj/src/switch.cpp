#include "causalis/switch.hpp"

#include "construct.hpp"

#include <cmath>

namespace causalis {

using conic::Expr;
using conic::Program;
using conic::Status;
using detail::kron;

ProcessMatrix pure_switch(const SwitchParams &params) {
  const Index d = params.psi.size();
  if (d < 1 || std::abs(params.psi.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("target state must be a unit vector");
  if (std::abs(std::norm(params.alpha) + std::norm(params.beta) - 1.0) > 1e-12)
    throw std::invalid_argument("control amplitudes must be normalized");
  const TensorSpace space{{"AI", d}, {"AO", d}, {"BI", d}, {"BO", d}, {"CIt", d}, {"CIc", 2}};
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(space.dim());
  // index of |ai ao bi bo t c>
  auto at = [d](Index ai, Index ao, Index bi, Index bo, Index t, Index c) {
    return ((((ai * d + ao) * d + bi) * d + bo) * d + t) * 2 + c;
  };
  for (Index s = 0; s < d; ++s)
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) {
        w(at(s, i, i, j, j, 0)) += params.alpha * params.psi(s);
        w(at(i, j, s, i, j, 1)) += params.beta * params.psi(s);
      }
  LabeledOperator op(space, ket_projector(w));
  return {op, PartyStructure::infer(space)};
}

ProcessMatrix reduced_switch() {
  const ProcessMatrix full = pure_switch(SwitchParams{});
  const LabeledOperator op = partial_trace(full.op, {"CIt"});
  return {op, PartyStructure::infer(op.space())};
}

ProcessMatrix noisy_reduced_switch(double eta) {
  if (!(eta >= 0 && eta <= 1))
    throw std::out_of_range("eta must lie in [0, 1]");
  ProcessMatrix w = reduced_switch();
  const auto &s = w.structure;
  const double dI = double(s.d("AI") * s.d("BI") * s.d_charlie());
  w.op = (1 - eta) * w.op + (eta / dI) * identity_on(w.op.space());
  return w;
}

const char *to_string(SwitchScenario s) {
  switch (s) {
  case SwitchScenario::TTT:
    return "TTT";
  case SwitchScenario::TTU:
    return "TTU";
  case SwitchScenario::TUU:
    return "TUU";
  case SwitchScenario::UTT:
    return "UTT";
  case SwitchScenario::UUT:
    return "UUT";
  case SwitchScenario::UUU:
    return "UUU";
  }
  return "?";
}

SwitchScenario switch_scenario_from_string(std::string_view name) {
  for (SwitchScenario s : kSwitchScenarios)
    if (name == to_string(s))
      return s;
  throw std::invalid_argument("unknown scenario " + std::string(name));
}

const char *to_string(BoundKind k) {
  return k == BoundKind::exact ? "exact" : "lower-bound";
}

namespace {

Devices untrusted_for(Scenario s) {
  const auto sw = switch_instruments();
  switch (s) {
  case Scenario::TTU:
    return {std::nullopt, std::nullopt, sw.charlie};
  case Scenario::TUU:
    return {std::nullopt, sw.bob, sw.charlie};
  case Scenario::UTT:
    return {sw.alice, std::nullopt, std::nullopt};
  case Scenario::UUT:
    return {sw.alice, sw.bob, std::nullopt};
  case Scenario::SDI:
    break;
  }
  throw std::invalid_argument("the switch is tripartite");
}

Assemblage assemblage_at(const LabeledOperator &W, Scenario s) {
  return assemblage_from_process(W, untrusted_for(s), s);
}

std::optional<Scenario> assemblage_scenario(SwitchScenario s) {
  switch (s) {
  case SwitchScenario::TTU:
    return Scenario::TTU;
  case SwitchScenario::TUU:
    return Scenario::TUU;
  case SwitchScenario::UTT:
    return Scenario::UTT;
  case SwitchScenario::UUT:
    return Scenario::UUT;
  default:
    return std::nullopt;
  }
}

RobustnessResult robustness_ttt(const conic::SolverOptions &opt) {
  const ProcessMatrix red = reduced_switch();
  const ProcessMatrix noise = noisy_reduced_switch(1.0);
  const PartyStructure &s = red.structure;
  Program p;
  const SepCone cone = add_sep_cone(p, s);
  const conic::Var eta = p.add_nonneg("eta");
  p.add_equality(p(cone.first) + p(cone.second) -
                     Expr::scaled(eta, (noise.op - red.op).matrix()),
                 red.op.matrix());
  p.minimize(p(eta));
  auto r = conic::solve(p, opt);
  if (r.status != Status::optimal)
    throw SolverFailure("TTT robustness program did not converge");
  RobustnessResult res;
  res.scenario = SwitchScenario::TTT;
  res.eta_star = std::clamp(r.value(eta), 0.0, 1.0);
  CausalDecomposition d{0, {s.space, hermitian_part(r.matrix(p, cone.first))},
                        {s.space, hermitian_part(r.matrix(p, cone.second))}, r.slack};
  d.q = d.first.trace().real() / (d.first + d.second).trace().real();
  res.residuals = verify_decomposition(noisy_reduced_switch(res.eta_star), d);
  res.process_decomposition = d;
  return res;
}

RobustnessResult robustness_assemblage(SwitchScenario ss, Scenario s,
                                       const conic::SolverOptions &opt) {
  const Assemblage red = switch_assemblage(s, 0.0);
  const Assemblage noise = switch_assemblage(s, 1.0);
  Program p;
  const AssemblageCone cone = add_causal_assemblage_cone(p, red);
  const conic::Var eta = p.add_nonneg("eta");
  for (std::size_t e = 0; e < red.elements.size(); ++e)
    p.add_equality(p(cone.first[e]) + p(cone.second[e]) -
                       Expr::scaled(eta, (noise.elements[e] - red.elements[e]).matrix()),
                   red.elements[e].matrix());
  p.minimize(p(eta));
  auto r = conic::solve(p, opt);
  if (r.status != Status::optimal)
    throw SolverFailure(std::string(to_string(ss)) + " robustness program did not converge");
  RobustnessResult res;
  res.scenario = ss;
  res.eta_star = std::clamp(r.value(eta), 0.0, 1.0);
  res.bound_kind = s == Scenario::UUT ? BoundKind::exact : BoundKind::lower_bound;
  res.outer_approximation = s != Scenario::TTU;
  AssemblageDecomposition d;
  for (auto v : cone.first)
    d.first.emplace_back(red.trusted, hermitian_part(r.matrix(p, v)));
  for (auto v : cone.second)
    d.second.emplace_back(red.trusted, hermitian_part(r.matrix(p, v)));
  const Assemblage at = switch_assemblage(s, res.eta_star);
  double t = 0, total = 0;
  for (Index o = 0; o < at.outcome_count(); ++o) {
    t += d.first[std::size_t(o)].trace().real();
    total += at.elements[std::size_t(o)].trace().real();
  }
  d.q = total > 0 ? std::clamp(t / total, 0.0, 1.0) : 0.0;
  res.residuals = verify_assemblage_decomposition(at, d);
  res.assemblage_decomposition = std::move(d);
  return res;
}

RobustnessResult robustness_uuu(const conic::SolverOptions &opt) {
  const Behaviour red = switch_behaviour(0.0);
  const Behaviour noise = switch_behaviour(1.0);
  const auto strategies = enumerate_deterministic_causal(red.settings, red.outcomes);
  const std::size_t E = red.p.size();
  Program p;
  std::vector<conic::Var> w;
  std::vector<Expr> rows(E);
  std::vector<Behaviour> det;
  for (const auto &st : strategies) {
    w.push_back(p.add_nonneg());
    det.push_back(st.behaviour(red.settings, red.outcomes));
    for (std::size_t e = 0; e < E; ++e)
      if (det.back().p[e] != 0)
        rows[e] += Expr::variable(w.back(), 1);
  }
  const conic::Var eta = p.add_nonneg("eta");
  for (std::size_t e = 0; e < E; ++e) {
    MatrixC c(1, 1);
    c(0, 0) = noise.p[e] - red.p[e];
    p.add_equality(rows[e] - Expr::scaled(eta, c), red.p[e]);
  }
  p.minimize(p(eta));
  auto r = conic::solve_lp(p, opt);
  if (r.status != Status::optimal)
    throw SolverFailure("UUU robustness program did not converge");
  RobustnessResult res;
  res.scenario = SwitchScenario::UUU;
  res.eta_star = std::clamp(r.value(eta), 0.0, 1.0);
  CausalBehaviourDecomposition d{0, Behaviour(red.settings, red.outcomes),
                                 Behaviour(red.settings, red.outcomes)};
  double t1 = 0, t2 = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = std::max(0.0, r.value(w[i]));
    const bool ab = strategies[i].order == Order::AB || strategies[i].order == Order::ABC;
    (ab ? t1 : t2) += v;
    Behaviour &target = ab ? d.first : d.second;
    for (std::size_t e = 0; e < E; ++e)
      target.p[e] += v * det[i].p[e];
  }
  const Behaviour at = switch_behaviour(res.eta_star);
  double worst = 0;
  for (std::size_t e = 0; e < E; ++e)
    worst = std::max(worst, std::abs(d.first.p[e] + d.second.p[e] - at.p[e]));
  for (auto [b, t] : {std::pair{&d.first, t1}, std::pair{&d.second, t2}}) {
    if (t > 0)
      for (auto &e : b->p)
        e /= t;
    else
      *b = uniform_behaviour(red.settings, red.outcomes);
  }
  d.q = t1 / (t1 + t2);
  res.residuals.items.push_back({"sum", worst});
  res.residuals.min_eigenvalue = 0;
  res.residuals.passed = worst <= 1e-7;
  res.behaviour_decomposition = d;
  return res;
}

} // namespace

Assemblage switch_assemblage(Scenario s, double eta) {
  return assemblage_at(noisy_reduced_switch(eta).op, s);
}

Behaviour switch_behaviour(double eta) {
  const auto sw = switch_instruments();
  return born(noisy_reduced_switch(eta).op, sw.alice, sw.bob, sw.charlie);
}

Devices switch_trusted(Scenario s) {
  const auto sw = switch_instruments();
  switch (s) {
  case Scenario::TTU:
    return {sw.alice, sw.bob, std::nullopt};
  case Scenario::TUU:
    return {sw.alice, std::nullopt, std::nullopt};
  case Scenario::UTT:
    return {std::nullopt, sw.bob, sw.charlie};
  case Scenario::UUT:
    return {std::nullopt, std::nullopt, sw.charlie};
  case Scenario::SDI:
    break;
  }
  throw std::invalid_argument("the switch is tripartite");
}

RobustnessResult robustness(SwitchScenario s, const conic::SolverOptions &opt) {
  if (s == SwitchScenario::TTT)
    return robustness_ttt(opt);
  if (s == SwitchScenario::UUU)
    return robustness_uuu(opt);
  return robustness_assemblage(s, *assemblage_scenario(s), opt);
}

std::vector<RobustnessResult> table2(const conic::SolverOptions &opt) {
  std::vector<RobustnessResult> out;
  for (SwitchScenario s : kSwitchScenarios)
    out.push_back(robustness(s, opt));
  return out;
}

UUTVerification verify_uut_causality(int trials, std::uint64_t seed,
                                     const conic::SolverOptions &opt) {
  if (trials < 1)
    throw std::invalid_argument("at least one trial is needed");
  std::mt19937_64 rng(seed);
  const auto sw = switch_instruments();
  const LabeledOperator W = reduced_switch().op;
  auto conjugated = [&](const InstrumentSet &base) {
    const MatrixC u = kron(random_unitary(2, rng), random_unitary(2, rng));
    std::vector<std::vector<MatrixC>> m;
    for (const auto &row : base.elements) {
      m.emplace_back();
      for (const auto &e : row)
        m.back().push_back(u * e.matrix() * u.adjoint());
    }
    return InstrumentSet(base.input, base.output, m);
  };
  auto grained = [&](const std::string &in, const std::string &out) {
    return coarse_grain(random_instrument(2, 2, 2, 4, rng, in, out), {0, 1, 2, 2});
  };
  UUTVerification rep;
  for (int t = 0; t < trials; ++t) {
    UUTTrial trial;
    Devices d;
    if (t % 2) {
      trial.instruments = "coarse-grained";
      d.alice = grained("AI", "AO");
      d.bob = grained("BI", "BO");
    } else {
      trial.instruments = "conjugated";
      d.alice = conjugated(sw.alice);
      d.bob = conjugated(sw.bob);
    }
    const Assemblage w = assemblage_from_process(W, d, Scenario::UUT);
    const auto c = is_causal_assemblage(w, opt);
    trial.causal = c.causal;
    trial.slack = c.slack;
    if (c.causal)
      trial.residual = verify_assemblage_decomposition(w, *c.decomposition).worst();
    rep.all_causal = rep.all_causal && c.causal;
    rep.worst_slack = t == 0 ? trial.slack : std::min(rep.worst_slack, trial.slack);
    rep.worst_residual = std::max(rep.worst_residual, trial.residual);
    rep.trials.push_back(trial);
  }
  return rep;
}

} // namespace causalis
