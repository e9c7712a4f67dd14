#include "causalis/behaviours.hpp"

#include "construct.hpp"

#include <cmath>
#include <numeric>

namespace causalis {

using conic::Expr;
using conic::Program;
using conic::Status;
using detail::diag_projector;
using detail::embedding_choi;
using detail::ipow;
using detail::kron;
using detail::digits;
using detail::product;
using detail::undigits;

namespace {

void require_shape(const Behaviour &a, const Behaviour &b) {
  if (a.settings != b.settings || a.outcomes != b.outcomes)
    throw std::invalid_argument("behaviours have different shapes");
}

} // namespace

Behaviour::Behaviour(std::vector<Index> s, std::vector<Index> o)
    : settings(std::move(s)), outcomes(std::move(o)) {
  if (settings.size() != outcomes.size() || settings.size() < 2 ||
      settings.size() > 3)
    throw std::invalid_argument("behaviour must be bipartite or tripartite");
  for (Index v : settings)
    if (v < 1)
      throw std::invalid_argument("setting counts must be positive");
  for (Index v : outcomes)
    if (v < 1)
      throw std::invalid_argument("outcome counts must be positive");
  p.assign(setting_count() * outcome_count(), 0.0);
}

Index Behaviour::setting_count() const { return product(settings); }
Index Behaviour::outcome_count() const { return product(outcomes); }

std::size_t Behaviour::flat(const std::vector<Index> &in,
                            const std::vector<Index> &out) const {
  return undigits(in, settings) * outcome_count() + undigits(out, outcomes);
}

std::vector<Index> Behaviour::setting_tuple(Index s) const {
  return digits(s, settings);
}
std::vector<Index> Behaviour::outcome_tuple(Index o) const {
  return digits(o, outcomes);
}

ResidualReport validate_behaviour(const Behaviour &b) {
  const Index S = b.setting_count(), O = b.outcome_count();
  double neg = 0, norm = 0, charlie = 0;
  for (Index s = 0; s < S; ++s) {
    double sum = 0;
    for (Index o = 0; o < O; ++o) {
      neg = std::max(neg, -b.p[s * O + o]);
      sum += b.p[s * O + o];
    }
    norm = std::max(norm, std::abs(sum - 1));
  }
  ResidualReport r;
  r.items.push_back({"negativity", std::max(0.0, neg)});
  r.items.push_back({"normalization", norm});
  if (b.tripartite()) {
    const Index IC = b.settings[2], OC = b.outcomes[2];
    for (Index x = 0; x < b.settings[0]; ++x)
      for (Index y = 0; y < b.settings[1]; ++y)
        for (Index a = 0; a < b.outcomes[0]; ++a)
          for (Index bb = 0; bb < b.outcomes[1]; ++bb) {
            auto marg = [&](Index z) {
              double m = 0;
              for (Index c = 0; c < OC; ++c)
                m += b({x, y, z}, {a, bb, c});
              return m;
            };
            const double m0 = marg(0);
            for (Index z = 1; z < IC; ++z)
              charlie = std::max(charlie, std::abs(marg(z) - m0));
          }
    r.items.push_back({"charlie last", charlie});
  }
  r.passed = neg <= 1e-12 && norm <= kResidualTol && charlie <= kResidualTol;
  return r;
}

Behaviour normalized(const Behaviour &b) {
  auto rep = validate_behaviour(b);
  if (!rep.passed)
    throw std::invalid_argument("behaviour is not normalized");
  Behaviour out = b;
  const Index S = b.setting_count(), O = b.outcome_count();
  for (Index s = 0; s < S; ++s) {
    double sum = 0;
    for (Index o = 0; o < O; ++o) {
      out.p[s * O + o] = std::max(0.0, out.p[s * O + o]);
      sum += out.p[s * O + o];
    }
    for (Index o = 0; o < O; ++o)
      out.p[s * O + o] /= sum;
  }
  return out;
}

double max_abs_difference(const Behaviour &a, const Behaviour &b) {
  require_shape(a, b);
  double m = 0;
  for (std::size_t i = 0; i < a.p.size(); ++i)
    m = std::max(m, std::abs(a.p[i] - b.p[i]));
  return m;
}

Behaviour uniform_behaviour(std::vector<Index> settings, std::vector<Index> outcomes) {
  Behaviour b(std::move(settings), std::move(outcomes));
  std::fill(b.p.begin(), b.p.end(), 1.0 / double(b.outcome_count()));
  return b;
}

Behaviour two_way_signalling() {
  Behaviour b({2, 2}, {2, 2});
  for (Index x = 0; x < 2; ++x)
    for (Index y = 0; y < 2; ++y)
      b({x, y}, {y, x}) = 1.0;
  return b;
}

Behaviour born(const LabeledOperator &w, const InstrumentSet &a,
               const InstrumentSet &b) {
  Behaviour p({a.settings(), b.settings()}, {a.outcomes(), b.outcomes()});
  for (Index x = 0; x < a.settings(); ++x)
    for (Index i = 0; i < a.outcomes(); ++i) {
      const LabeledOperator wa = contract(w, a(x, i));
      for (Index y = 0; y < b.settings(); ++y)
        for (Index j = 0; j < b.outcomes(); ++j)
          p({x, y}, {i, j}) = expectation(wa, b(y, j)).real();
    }
  return p;
}

Behaviour born(const LabeledOperator &w, const InstrumentSet &a,
               const InstrumentSet &b, const POVMSet &c) {
  Behaviour p({a.settings(), b.settings(), c.settings()},
              {a.outcomes(), b.outcomes(), c.outcomes()});
  for (Index x = 0; x < a.settings(); ++x)
    for (Index i = 0; i < a.outcomes(); ++i) {
      const LabeledOperator wa = contract(w, a(x, i));
      for (Index y = 0; y < b.settings(); ++y)
        for (Index j = 0; j < b.outcomes(); ++j) {
          const LabeledOperator wb = contract(wa, b(y, j));
          for (Index z = 0; z < c.settings(); ++z)
            for (Index k = 0; k < c.outcomes(); ++k)
              p({x, y, z}, {i, j, k}) = expectation(wb, c(z, k)).real();
        }
    }
  return p;
}

PartyStructure structure_of(const InstrumentSet &a, const InstrumentSet &b,
                            const POVMSet *c) {
  std::vector<SpaceLabel> f{a.input, a.output, b.input, b.output};
  if (c)
    f.push_back(c->space);
  return PartyStructure::infer(TensorSpace(f));
}

// --- deterministic strategies ------------------------------------------------

Behaviour DeterministicCausalStrategy::behaviour(
    const std::vector<Index> &settings, const std::vector<Index> &outcomes) const {
  Behaviour b(settings, outcomes);
  const bool ab = order == Order::AB || order == Order::ABC;
  const Index IA = settings[0], IB = settings[1];
  const Index IC = b.tripartite() ? settings[2] : 1;
  for (Index s = 0; s < b.setting_count(); ++s) {
    auto in = b.setting_tuple(s);
    const Index x = in[0], y = in[1], z = b.tripartite() ? in[2] : 0;
    std::vector<Index> out(settings.size());
    out[0] = ab ? first[x] : second[y * IA + x];
    out[1] = ab ? second[x * IB + y] : first[y];
    if (b.tripartite())
      out[2] = charlie[(x * IB + y) * IC + z];
    b(in, out) = 1.0;
  }
  return b;
}

ExplosionGuard::ExplosionGuard(double c)
    : std::length_error("deterministic strategy count " +
                        std::to_string(static_cast<long long>(c)) +
                        " exceeds the enumeration limit"),
      count(c) {}

double deterministic_strategy_count(const std::vector<Index> &settings,
                                    const std::vector<Index> &outcomes) {
  if (settings.size() != outcomes.size() || settings.size() < 2 || settings.size() > 3)
    throw std::invalid_argument("behaviour must be bipartite or tripartite");
  const double IA = settings[0], IB = settings[1];
  const double OA = outcomes[0], OB = outcomes[1];
  double c = 1;
  if (settings.size() == 3)
    c = std::pow(double(outcomes[2]), IA * IB * settings[2]);
  return c * (std::pow(OA, IA) * std::pow(OB, IA * IB) +
              std::pow(OB, IB) * std::pow(OA, IA * IB));
}

std::vector<DeterministicCausalStrategy>
enumerate_deterministic_causal(const std::vector<Index> &settings,
                               const std::vector<Index> &outcomes) {
  const double count = deterministic_strategy_count(settings, outcomes);
  if (count > kStrategyLimit)
    throw ExplosionGuard(count);
  const bool tri = settings.size() == 3;
  const Index IA = settings[0], IB = settings[1], IC = tri ? settings[2] : 1;
  std::vector<DeterministicCausalStrategy> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Order o : tri ? std::vector{Order::ABC, Order::BAC}
                     : std::vector{Order::AB, Order::BA}) {
    const bool ab = o == Order::AB || o == Order::ABC;
    // odometer over the concatenated tables, last entry fastest
    std::vector<Index> radix;
    const Index n1 = ab ? IA : IB, n2 = IA * IB, n3 = tri ? IA * IB * IC : 0;
    radix.insert(radix.end(), n1, ab ? outcomes[0] : outcomes[1]);
    radix.insert(radix.end(), n2, ab ? outcomes[1] : outcomes[0]);
    if (tri)
      radix.insert(radix.end(), n3, outcomes[2]);
    std::vector<Index> d(radix.size(), 0);
    while (true) {
      DeterministicCausalStrategy s;
      s.order = o;
      s.first.assign(d.begin(), d.begin() + n1);
      s.second.assign(d.begin() + n1, d.begin() + n1 + n2);
      s.charlie.assign(d.begin() + n1 + n2, d.end());
      out.push_back(std::move(s));
      std::size_t i = d.size();
      while (i > 0 && ++d[i - 1] == radix[i - 1])
        d[--i] = 0;
      if (i == 0)
        break;
    }
  }
  return out;
}

// --- causal membership ----------------------------------------------------------

Behaviour mix(const CausalBehaviourDecomposition &d) {
  require_shape(d.first, d.second);
  Behaviour out = d.first;
  for (std::size_t i = 0; i < out.p.size(); ++i)
    out.p[i] = d.q * d.first.p[i] + (1 - d.q) * d.second.p[i];
  return out;
}

Behaviour random_ordered_behaviour(const std::vector<Index> &settings,
                                   const std::vector<Index> &outcomes, Order o,
                                   std::mt19937_64 &rng) {
  // product of conditionals: first party, second given first, Charlie given both
  const bool ab = o == Order::AB || o == Order::ABC;
  std::exponential_distribution<double> ex(1.0);
  Behaviour b(settings, outcomes);
  const bool tri = b.tripartite();
  const Index IA = settings[0], IB = settings[1], IC = tri ? settings[2] : 1;
  const Index OA = outcomes[0], OB = outcomes[1], OC = tri ? outcomes[2] : 1;
  auto simplex = [&](Index n) {
    std::vector<double> v(n);
    double s = 0;
    for (auto &e : v)
      s += (e = ex(rng));
    for (auto &e : v)
      e /= s;
    return v;
  };
  const Index IF = ab ? IA : IB, OF = ab ? OA : OB;
  const Index OS = ab ? OB : OA;
  std::vector<std::vector<double>> pf(IF), ps(IA * IB * OF), pc(IA * IB * IC * OA * OB);
  for (auto &v : pf)
    v = simplex(OF);
  for (auto &v : ps)
    v = simplex(OS);
  for (auto &v : pc)
    v = simplex(OC);
  for (Index s = 0; s < b.setting_count(); ++s) {
    auto in = b.setting_tuple(s);
    const Index x = in[0], y = in[1], z = tri ? in[2] : 0;
    for (Index k = 0; k < b.outcome_count(); ++k) {
      auto out = b.outcome_tuple(k);
      const Index a = out[0], bb = out[1], c = tri ? out[2] : 0;
      const Index f = ab ? a : bb, sc = ab ? bb : a;
      const double p1 = pf[ab ? x : y][f];
      const double p2 = ps[(x * IB + y) * OF + f][sc];
      const double p3 = pc[(((x * IB + y) * IC + z) * OA + a) * OB + bb][c];
      b.p[s * b.outcome_count() + k] = p1 * p2 * p3;
    }
  }
  return b;
}

CausalBehaviourDecomposition random_causal_decomposition(
    const std::vector<Index> &settings, const std::vector<Index> &outcomes,
    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const bool tri = settings.size() == 3;
  CausalBehaviourDecomposition d;
  d.q = std::uniform_real_distribution<double>(0, 1)(rng);
  d.first = random_ordered_behaviour(settings, outcomes, tri ? Order::ABC : Order::AB, rng);
  d.second = random_ordered_behaviour(settings, outcomes, tri ? Order::BAC : Order::BA, rng);
  return d;
}

namespace {

// Scaled projection onto sum_l w_l D_l = p: w <- w (1 + A^T y) keeps the
// weights' support and sign while removing the interior-point residual.
void polish_weights(const std::vector<DeterministicCausalStrategy> &strategies,
                    const Behaviour &p, Eigen::VectorXd &w) {
  const Index m = Index(p.p.size()), n = w.size();
  std::vector<std::vector<Index>> hit(n);
  for (Index l = 0; l < n; ++l) {
    const Behaviour d = strategies[l].behaviour(p.settings, p.outcomes);
    for (Index e = 0; e < m; ++e)
      if (d.p[e] != 0)
        hit[l].push_back(e);
  }
  const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(p.p.data(), m);
  for (int it = 0; it < 3; ++it) {
    Eigen::VectorXd fit = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
    for (Index l = 0; l < n; ++l)
      for (Index e : hit[l]) {
        fit(e) += w(l);
        for (Index f : hit[l])
          G(e, f) += w(l);
      }
    const Eigen::VectorXd res = target - fit;
    if (res.lpNorm<Eigen::Infinity>() <= 1e-15)
      return;
    const Eigen::VectorXd y = G.completeOrthogonalDecomposition().solve(res);
    for (Index l = 0; l < n; ++l) {
      double g = 0;
      for (Index e : hit[l])
        g += y(e);
      w(l) *= std::max(0.0, 1.0 + g);
    }
  }
}

} // namespace

CausalBehaviourResult is_causal_behaviour(const Behaviour &input,
                                          const conic::SolverOptions &opt) {
  const Behaviour p = normalized(input);
  CausalBehaviourResult res;
  res.strategies = enumerate_deterministic_causal(p.settings, p.outcomes);
  const Index S = p.setting_count(), O = p.outcome_count();
  Program prog;
  std::vector<conic::Var> w;
  w.reserve(res.strategies.size());
  std::vector<Expr> rows(S * O);
  for (const auto &st : res.strategies) {
    w.push_back(prog.add_nonneg());
    const Behaviour d = st.behaviour(p.settings, p.outcomes);
    for (Index e = 0; e < S * O; ++e)
      if (d.p[e] != 0)
        rows[e] += Expr::variable(w.back(), 1);
  }
  for (Index e = 0; e < S * O; ++e)
    prog.add_equality(rows[e], p.p[e]);
  auto r = conic::solve_lp(prog, opt);
  if (r.status == Status::optimal) {
    res.causal = true;
    Eigen::VectorXd wt(Index(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i)
      wt(Index(i)) = std::max(0.0, r.value(w[i]));
    polish_weights(res.strategies, p, wt);
    CausalBehaviourDecomposition d{0, Behaviour(p.settings, p.outcomes),
                                   Behaviour(p.settings, p.outcomes)};
    double t1 = 0, t2 = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double v = wt(Index(i));
      res.weights.push_back(v);
      if (v == 0)
        continue;
      const bool ab = res.strategies[i].order == Order::AB ||
                      res.strategies[i].order == Order::ABC;
      Behaviour &target = ab ? d.first : d.second;
      (ab ? t1 : t2) += v;
      const Behaviour det = res.strategies[i].behaviour(p.settings, p.outcomes);
      for (std::size_t e = 0; e < det.p.size(); ++e)
        target.p[e] += v * det.p[e];
    }
    for (auto [b, t] : {std::pair{&d.first, t1}, std::pair{&d.second, t2}}) {
      if (t > 0)
        for (auto &e : b->p)
          e /= t;
      else
        *b = uniform_behaviour(p.settings, p.outcomes);
    }
    d.q = t1 / (t1 + t2);
    res.decomposition = d;
    return res;
  }
  if (r.status != Status::infeasible)
    throw SolverFailure("causal behaviour program did not converge");
  Behaviour ineq(p.settings, p.outcomes);
  for (Index e = 0; e < S * O; ++e)
    ineq.p[e] = r.dual[e](0);
  res.violation = -inequality_value(ineq, p);
  res.inequality = ineq;
  return res;
}

double inequality_value(const Behaviour &coefficients, const Behaviour &p) {
  require_shape(coefficients, p);
  double v = 0;
  for (std::size_t i = 0; i < p.p.size(); ++i)
    v += coefficients.p[i] * p.p[i];
  return v;
}

double gyni_success(const Behaviour &p) {
  if (p.settings != std::vector<Index>{2, 2} || p.outcomes != std::vector<Index>{2, 2})
    throw std::invalid_argument("GYNI needs two dichotomic parties");
  double s = 0;
  for (Index x = 0; x < 2; ++x)
    for (Index y = 0; y < 2; ++y)
      s += p({x, y}, {y, x});
  return 0.25 * s;
}

double order_residual(const Behaviour &p, Order o) {
  const bool ab = o == Order::AB || o == Order::ABC;
  if (p.tripartite() != (o == Order::ABC || o == Order::BAC))
    throw std::invalid_argument("order does not fit the behaviour");
  const int f = ab ? 0 : 1;
  const Index S = p.setting_count(), O = p.outcome_count();
  // marginal of the first party at each setting vs. at the reference setting
  // where every other input is 0
  double worst = 0;
  for (Index s = 0; s < S; ++s) {
    auto in = p.setting_tuple(s);
    auto ref = in;
    for (std::size_t k = 0; k < ref.size(); ++k)
      if (int(k) != f)
        ref[k] = 0;
    for (Index v = 0; v < p.outcomes[f]; ++v) {
      double m = 0, m0 = 0;
      for (Index k = 0; k < O; ++k) {
        auto out = p.outcome_tuple(k);
        if (out[f] != v)
          continue;
        m += p(in, out);
        m0 += p(ref, out);
      }
      worst = std::max(worst, std::abs(m - m0));
    }
  }
  return worst;
}

// --- realization ---------------------------------------------------------------

namespace {

// Conditionals of an ordered behaviour: first party on its own input, second
// on (first outcome, both inputs), Charlie on (both outcomes, all inputs).
struct Conditionals {
  bool ab;
  Index IA, IB, IC, OA, OB, OC;
  std::vector<double> first;  // [f_in][f_out]
  std::vector<double> second; // [x][y][f_out][s_out]
  std::vector<double> charlie; // [x][y][z][a][b][c]

  double pf(Index fin, Index fout) const { return first[fin * (ab ? OA : OB) + fout]; }
  double ps(Index x, Index y, Index fout, Index sout) const {
    const Index OF = ab ? OA : OB, OS = ab ? OB : OA;
    return second[((x * IB + y) * OF + fout) * OS + sout];
  }
  double pc(Index x, Index y, Index z, Index a, Index b, Index c) const {
    return charlie[((((x * IB + y) * IC + z) * OA + a) * OB + b) * OC + c];
  }
};

Conditionals conditionals(const Behaviour &p, bool ab) {
  const bool tri = p.tripartite();
  Conditionals c{ab, p.settings[0], p.settings[1], tri ? p.settings[2] : 1,
                 p.outcomes[0], p.outcomes[1], tri ? p.outcomes[2] : 1, {}, {}, {}};
  const Index OF = ab ? c.OA : c.OB, OS = ab ? c.OB : c.OA;
  auto P = [&](Index x, Index y, Index z, Index a, Index b, Index cc) {
    return tri ? p({x, y, z}, {a, b, cc}) : p({x, y}, {a, b});
  };
  auto joint = [&](Index x, Index y, Index z, Index a, Index b) {
    double s = 0;
    for (Index k = 0; k < c.OC; ++k)
      s += P(x, y, z, a, b, k);
    return s;
  };
  auto normalize = [](std::vector<double>::iterator it, Index n) {
    double s = 0;
    for (Index i = 0; i < n; ++i)
      s += std::max(0.0, it[i]);
    for (Index i = 0; i < n; ++i)
      it[i] = s > 1e-300 ? std::max(0.0, it[i]) / s : 1.0 / double(n);
  };
  const Index IF = ab ? c.IA : c.IB;
  c.first.assign(IF * OF, 0.0);
  for (Index fin = 0; fin < IF; ++fin) {
    for (Index f = 0; f < OF; ++f)
      for (Index s = 0; s < OS; ++s)
        c.first[fin * OF + f] += ab ? joint(fin, 0, 0, f, s) : joint(0, fin, 0, s, f);
    normalize(c.first.begin() + fin * OF, OF);
  }
  c.second.assign(c.IA * c.IB * OF * OS, 0.0);
  for (Index x = 0; x < c.IA; ++x)
    for (Index y = 0; y < c.IB; ++y)
      for (Index f = 0; f < OF; ++f) {
        auto it = c.second.begin() + ((x * c.IB + y) * OF + f) * OS;
        for (Index s = 0; s < OS; ++s)
          it[s] = ab ? joint(x, y, 0, f, s) : joint(x, y, 0, s, f);
        normalize(it, OS);
      }
  c.charlie.assign(c.IA * c.IB * c.IC * c.OA * c.OB * c.OC, 0.0);
  for (Index x = 0; x < c.IA; ++x)
    for (Index y = 0; y < c.IB; ++y)
      for (Index z = 0; z < c.IC; ++z)
        for (Index a = 0; a < c.OA; ++a)
          for (Index b = 0; b < c.OB; ++b) {
            auto it = c.charlie.begin() +
                      ((((x * c.IB + y) * c.IC + z) * c.OA + a) * c.OB + b) * c.OC;
            for (Index k = 0; k < c.OC; ++k)
              it[k] = P(x, y, z, a, b, k);
            normalize(it, c.OC);
          }
  return c;
}

struct Component {
  double weight;
  bool ab;
  Conditionals cond;
};

} // namespace

BehaviourRealization realize_causal_behaviour(const CausalBehaviourDecomposition &d) {
  require_shape(d.first, d.second);
  if (!(d.q >= 0 && d.q <= 1))
    throw std::invalid_argument("mixing weight must lie in [0,1]");
  for (const Behaviour *b : {&d.first, &d.second})
    if (!validate_behaviour(*b).passed)
      throw std::invalid_argument("decomposition component is not a behaviour");
  const bool tri = d.first.tripartite();
  const Order o1 = tri ? Order::ABC : Order::AB, o2 = tri ? Order::BAC : Order::BA;
  if (d.q > 0 && order_residual(d.first, o1) > 1e-9)
    throw std::invalid_argument("first component is not causally ordered");
  if (d.q < 1 && order_residual(d.second, o2) > 1e-9)
    throw std::invalid_argument("second component is not causally ordered");

  std::vector<Component> comps;
  if (d.q > 0)
    comps.push_back({d.q, true, conditionals(d.first, true)});
  if (d.q < 1)
    comps.push_back({1 - d.q, false, conditionals(d.second, false)});
  const bool has_ab = d.q > 0, has_ba = d.q < 1;

  const Behaviour &shape = d.first;
  const Index IA = shape.settings[0], IB = shape.settings[1];
  const Index OA = shape.outcomes[0], OB = shape.outcomes[1];
  const Index IC = tri ? shape.settings[2] : 1, OC = tri ? shape.outcomes[2] : 1;
  const Index H = tri ? ipow(OC, IC) : 1;
  const Index mA = OA * IA, mB = OB * IB;
  const Index dAO = std::max(mA, H), dBO = std::max(mB, H);
  // Inputs carry the other party's message on the low levels, plus one
  // extra level telling the party that it acts first.
  const Index dAI = (has_ba ? dBO : 0) + (has_ab ? 1 : 0);
  const Index dBI = (has_ab ? dAO : 0) + (has_ba ? 1 : 0);
  const Index firstA = dAI - 1, firstB = dBI - 1;

  const SpaceLabel AI{"AI", dAI}, AO{"AO", dAO}, BI{"BI", dBI}, BO{"BO", dBO};
  const SpaceLabel CI{"CI", H};
  std::vector<SpaceLabel> f{AI, AO, BI, BO};
  if (tri)
    f.push_back(CI);
  const TensorSpace space(f);

  // response state sent to Charlie: digit z of h is the outcome for setting z
  auto hdigit = [&](Index h, Index z) { return (h / ipow(OC, z)) % OC; };
  auto response = [&](const Conditionals &c, Index x, Index y, Index a, Index b) {
    MatrixC m = MatrixC::Zero(H, H);
    for (Index h = 0; h < H; ++h) {
      double pr = 1;
      for (Index z = 0; z < IC; ++z)
        pr *= c.pc(x, y, z, a, b, hdigit(h, z));
      m(h, h) = pr;
    }
    return m;
  };
  // output of the second party: uniform when Charlie is absent
  auto send_on = [&](Index dout, const MatrixC &resp) -> MatrixC {
    if (!tri)
      return MatrixC::Identity(dout, dout) / double(dout);
    MatrixC m = MatrixC::Zero(dout, dout);
    m.topLeftCorner(H, H) = resp;
    return m;
  };

  std::vector<std::vector<MatrixC>> Am(IA, std::vector<MatrixC>(OA, MatrixC::Zero(dAI * dAO, dAI * dAO)));
  std::vector<std::vector<MatrixC>> Bm(IB, std::vector<MatrixC>(OB, MatrixC::Zero(dBI * dBO, dBI * dBO)));
  const LabeledOperator zero(space, MatrixC::Zero(space.dim(), space.dim()));
  BehaviourRealization r{zero, {}, {}, std::nullopt, {d.q, zero, zero, 0},
                         PartyStructure::infer(space)};

  for (const Component &cp : comps) {
    const Conditionals &c = cp.cond;
    // first party's input pinned to its extra level, its output wired into
    // the second party's input, the second party's output discarded or
    // forwarded to Charlie
    const SpaceLabel &in1 = cp.ab ? AI : BI, &out1 = cp.ab ? AO : BO;
    const SpaceLabel &in2 = cp.ab ? BI : AI, &out2 = cp.ab ? BO : AO;
    LabeledOperator wk = tensor(on(in1, diag_projector(in1.dim, in1.dim - 1)),
                                embedding_choi(out1, in2));
    wk = tri ? tensor(wk, embedding_choi(out2, CI))
             : tensor(wk, identity_on(TensorSpace{out2}));
    (cp.ab ? r.decomposition.first : r.decomposition.second) =
        cp.weight * permute_to(wk, space);

    for (Index x = 0; x < IA; ++x)
      for (Index a = 0; a < OA; ++a) {
        if (cp.ab) {
          Am[x][a] += kron(diag_projector(dAI, firstA),
                           c.pf(x, a) * diag_projector(dAO, a * IA + x));
          continue;
        }
        for (Index k = 0; k < dBO; ++k) {
          MatrixC out;
          if (k < mB)
            out = c.ps(x, k % IB, k / IB, a) * send_on(dAO, response(c, x, k % IB, a, k / IB));
          else
            out = a == 0 ? send_on(dAO, diag_projector(H, 0)) : MatrixC::Zero(dAO, dAO);
          Am[x][a] += kron(diag_projector(dAI, k), out);
        }
      }
    for (Index y = 0; y < IB; ++y)
      for (Index b = 0; b < OB; ++b) {
        if (!cp.ab) {
          Bm[y][b] += kron(diag_projector(dBI, firstB),
                           c.pf(y, b) * diag_projector(dBO, b * IB + y));
          continue;
        }
        for (Index k = 0; k < dAO; ++k) {
          MatrixC out;
          if (k < mA)
            out = c.ps(k % IA, y, k / IA, b) * send_on(dBO, response(c, k % IA, y, k / IA, b));
          else
            out = b == 0 ? send_on(dBO, diag_projector(H, 0)) : MatrixC::Zero(dBO, dBO);
          Bm[y][b] += kron(diag_projector(dBI, k), out);
        }
      }
  }
  r.W = r.decomposition.first + r.decomposition.second;
  r.A = InstrumentSet(AI, AO, Am);
  r.B = InstrumentSet(BI, BO, Bm);
  if (tri) {
    std::vector<std::vector<MatrixC>> Cm(IC, std::vector<MatrixC>(OC, MatrixC::Zero(H, H)));
    for (Index z = 0; z < IC; ++z)
      for (Index h = 0; h < H; ++h)
        Cm[z][hdigit(h, z)](h, h) = 1.0;
    r.C = POVMSet(CI, Cm);
  }
  return r;
}

// --- certification ---------------------------------------------------------------

const char *to_string(Verdict v) {
  switch (v) {
  case Verdict::certified_noncausal:
    return "certified-noncausal";
  case Verdict::not_certified:
    return "not-certified";
  case Verdict::inconsistent_behaviour:
    return "inconsistent-behaviour";
  }
  return "?";
}

namespace {

std::vector<LabeledOperator> born_operators(const Behaviour &p, const InstrumentSet &a,
                                            const InstrumentSet &b, const POVMSet *c,
                                            const TensorSpace &space) {
  std::vector<LabeledOperator> ks;
  ks.reserve(p.p.size());
  for (Index s = 0; s < p.setting_count(); ++s) {
    auto in = p.setting_tuple(s);
    for (Index o = 0; o < p.outcome_count(); ++o) {
      auto out = p.outcome_tuple(o);
      LabeledOperator k = tensor(a(in[0], out[0]), b(in[1], out[1]));
      if (c)
        k = tensor(k, (*c)(in[2], out[2]));
      ks.push_back(permute_to(k, space));
    }
  }
  return ks;
}

void require_fit(const Behaviour &p, const InstrumentSet &a, const InstrumentSet &b,
                 const POVMSet *c) {
  std::vector<Index> s{a.settings(), b.settings()}, o{a.outcomes(), b.outcomes()};
  if (c) {
    s.push_back(c->settings());
    o.push_back(c->outcomes());
  }
  if (s != p.settings || o != p.outcomes)
    throw std::invalid_argument("behaviour shape does not match the instruments");
}

} // namespace

DDResult certify_dd(const Behaviour &input, const InstrumentSet &a,
                    const InstrumentSet &b, const POVMSet *c,
                    const conic::SolverOptions &opt) {
  const Behaviour p = normalized(input);
  require_fit(p, a, b, c);
  const PartyStructure s = structure_of(a, b, c);
  const auto ks = born_operators(p, a, b, c, s.space);
  const double tr = double(s.d("AO") * s.d("BO"));

  Program prog;
  const SepCone cone = add_sep_cone(prog, s);
  std::vector<std::size_t> rows;
  for (std::size_t e = 0; e < ks.size(); ++e)
    rows.push_back(prog.add_equality(Expr::inner(ks[e].matrix(), cone.first) +
                                         Expr::inner(ks[e].matrix(), cone.second),
                                     p.p[e]));
  const std::size_t trow =
      prog.add_equality(trace(prog(cone.first) + prog(cone.second)), tr);
  auto r = conic::solve(prog, opt);
  DDResult res;
  if (r.status == Status::optimal) {
    res.verdict = Verdict::not_certified;
    CausalDecomposition dec{0, {s.space, r.matrix(prog, cone.first)},
                            {s.space, r.matrix(prog, cone.second)}, r.slack};
    res.W_sep = dec.first + dec.second;
    dec.q = dec.first.trace().real() / res.W_sep->trace().real();
    res.decomposition = dec;
    return res;
  }
  if (r.status != Status::infeasible)
    throw SolverFailure("device-dependent program did not converge");

  // Farkas ray: sum_e v_e Tr(K_e V) + v_t Tr V >= 0 on SEP, < 0 on the data
  LabeledOperator S(s.space, MatrixC::Zero(s.space.dim(), s.space.dim()));
  for (std::size_t e = 0; e < ks.size(); ++e)
    S = S + r.dual[rows[e]](0) * ks[e];
  double vt = r.dual[trow](0);
  S = S + vt * LabeledOperator::identity(s.space);
  const double delta = witness_shift(r, prog, cone, s, S);
  S = S + delta * LabeledOperator::identity(s.space);
  vt += delta;
  // fold the trace term into setting 0, where outcomes sum to one
  Behaviour f(p.settings, p.outcomes);
  for (std::size_t e = 0; e < ks.size(); ++e)
    f.p[e] = r.dual[rows[e]](0);
  for (Index o = 0; o < p.outcome_count(); ++o)
    f.p[o] += vt * tr;
  res.value = inequality_value(f, p);
  res.functional = f;
  res.witness = S;
  if (res.value >= 0)
    throw SolverFailure("extracted functional does not separate the behaviour");

  // distinguish data no valid process can produce at all
  Program valid;
  const conic::Var w = valid.add_psd(s.space.dim(), "W");
  const MatrixC zero = MatrixC::Zero(s.space.dim(), s.space.dim());
  for (const auto &id : validity_identities(s))
    valid.add_equality(apply_identity(id, valid(w), s.space), zero);
  valid.add_equality(trace(valid(w)), tr);
  for (std::size_t e = 0; e < ks.size(); ++e)
    valid.add_equality(Expr::inner(ks[e].matrix(), w), p.p[e]);
  auto rv = conic::solve(valid, opt);
  if (rv.status == Status::infeasible)
    res.verdict = Verdict::inconsistent_behaviour;
  else if (rv.status == Status::optimal)
    res.verdict = Verdict::certified_noncausal;
  else
    throw SolverFailure("process consistency program did not converge");
  return res;
}

DIResult certify_di(const Behaviour &p, const conic::SolverOptions &opt) {
  auto c = is_causal_behaviour(p, opt);
  DIResult res;
  if (!c.causal) {
    res.verdict = Verdict::certified_noncausal;
    res.inequality = c.inequality;
    res.violation = c.violation;
    return res;
  }
  res.verdict = Verdict::not_certified;
  res.realization = realize_causal_behaviour(*c.decomposition);
  return res;
}

namespace {

LabeledOperator gyni_operator(const InstrumentSet &a, const InstrumentSet &b) {
  if (a.settings() != 2 || a.outcomes() != 2 || b.settings() != 2 || b.outcomes() != 2)
    throw std::invalid_argument("GYNI needs dichotomic instruments");
  const TensorSpace space{a.input, a.output, b.input, b.output};
  LabeledOperator m(space, MatrixC::Zero(space.dim(), space.dim()));
  for (Index x = 0; x < 2; ++x)
    for (Index y = 0; y < 2; ++y)
      m = m + 0.25 * tensor(a(x, y), b(y, x));
  return m;
}

} // namespace

double max_gyni_over_processes(const InstrumentSet &a, const InstrumentSet &b,
                               bool separable_only, const conic::SolverOptions &opt) {
  const PartyStructure s = structure_of(a, b);
  const MatrixC M = gyni_operator(a, b).matrix();
  const double tr = double(s.d("AO") * s.d("BO"));
  Program prog;
  if (separable_only) {
    const SepCone c = add_sep_cone(prog, s);
    prog.add_equality(trace(prog(c.first) + prog(c.second)), tr);
    prog.maximize(Expr::inner(M, c.first) + Expr::inner(M, c.second));
  } else {
    const conic::Var w = prog.add_psd(s.space.dim(), "W");
    const MatrixC zero = MatrixC::Zero(s.space.dim(), s.space.dim());
    for (const auto &id : validity_identities(s))
      prog.add_equality(apply_identity(id, prog(w), s.space), zero);
    prog.add_equality(trace(prog(w)), tr);
    prog.maximize(Expr::inner(M, w));
  }
  auto r = conic::solve(prog, opt);
  if (r.status != Status::optimal)
    throw SolverFailure("GYNI program did not converge");
  return r.objective_value;
}

namespace {

Eigen::MatrixXd born_rows(const InstrumentSet &a, const InstrumentSet &b,
                          const TensorSpace &space) {
  Behaviour shape({a.settings(), b.settings()}, {a.outcomes(), b.outcomes()});
  const auto ks = born_operators(shape, a, b, nullptr, space);
  const Index n = space.dim();
  Eigen::MatrixXd rows(Index(ks.size()), n * n);
  for (std::size_t e = 0; e < ks.size(); ++e)
    rows.row(Index(e)) = hermitian_coords(ks[e].matrix()).transpose();
  return rows;
}

} // namespace

LabeledOperator reconstruct_process(const Behaviour &p, const InstrumentSet &a,
                                    const InstrumentSet &b) {
  require_fit(p, a, b, nullptr);
  const PartyStructure s = structure_of(a, b);
  const Eigen::MatrixXd rows = born_rows(a, b, s.space);
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(p.p.data(), Index(p.p.size()));
  Eigen::VectorXd x = rows.completeOrthogonalDecomposition().solve(rhs);
  return {s.space, from_hermitian_coords(x, s.space.dim())};
}

double born_map_min_singular_value(const InstrumentSet &a, const InstrumentSet &b) {
  const PartyStructure s = structure_of(a, b);
  const Index n = s.space.dim();
  // basis of the linear subspace cut out by the validity identities
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n * n, n * n);
  for (const auto &id : validity_identities(s))
    P = (Eigen::MatrixXd::Identity(n * n, n * n) - Eigen::MatrixXd(identity_map(id, s.space))) * P;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P + P.transpose()));
  std::vector<Index> keep;
  for (Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > 0.5)
      keep.push_back(i);
  Eigen::MatrixXd basis(n * n, Index(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    basis.col(Index(j)) = es.eigenvectors().col(keep[j]);
  Eigen::MatrixXd map = born_rows(a, b, s.space) * basis;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(map);
  return svd.singularValues().minCoeff();
}

} // namespace causalis
