#include "causalis/assemblages.hpp"

#include "construct.hpp"

#include <cmath>

namespace causalis {

using conic::Expr;
using conic::Program;
using conic::Status;
using detail::diag_projector;
using detail::digits;
using detail::embedding_choi;
using detail::kron;
using detail::padded;
using detail::product;
using detail::undigits;

const char *to_string(Scenario s) {
  switch (s) {
  case Scenario::SDI:
    return "SDI";
  case Scenario::TTU:
    return "TTU";
  case Scenario::TUU:
    return "TUU";
  case Scenario::UTT:
    return "UTT";
  case Scenario::UUT:
    return "UUT";
  }
  return "?";
}

Scenario scenario_from_string(std::string_view name) {
  for (Scenario s : {Scenario::SDI, Scenario::TTU, Scenario::TUU, Scenario::UTT,
                     Scenario::UUT})
    if (name == to_string(s))
      return s;
  if (name == "SDI-bipartite")
    return Scenario::SDI;
  throw std::invalid_argument("unknown scenario " + std::string(name));
}

Index Assemblage::setting_count() const { return product(settings); }
Index Assemblage::outcome_count() const { return product(outcomes); }

std::size_t Assemblage::flat(const std::vector<Index> &in,
                             const std::vector<Index> &out) const {
  return undigits(in, settings) * outcome_count() + undigits(out, outcomes);
}

std::vector<Index> Assemblage::setting_tuple(Index s) const { return digits(s, settings); }
std::vector<Index> Assemblage::outcome_tuple(Index o) const { return digits(o, outcomes); }

namespace {

LabelSet charlie_of(const TensorSpace &space) {
  LabelSet c;
  for (const auto &f : space.factors())
    if (!f.name.empty() && f.name[0] == 'C')
      c.push_back(f.name);
  return c;
}

LabelSet with(LabelSet a, const LabelSet &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void require_names(const TensorSpace &space, const LabelSet &names, Scenario s) {
  if (space.names() != names)
    throw LabelError(std::string("trusted factors do not fit scenario ") + to_string(s));
}

// Trusted factor layout and untrusted arity per scenario.
void check_layout(const Assemblage &w) {
  const auto &t = w.trusted;
  const LabelSet C = charlie_of(t);
  std::size_t parties = 1;
  switch (w.scenario) {
  case Scenario::SDI:
    require_names(t, {"BI", "BO"}, w.scenario);
    break;
  case Scenario::TTU:
    require_names(t, {"AI", "AO", "BI", "BO"}, w.scenario);
    break;
  case Scenario::TUU:
    require_names(t, {"AI", "AO"}, w.scenario);
    parties = 2;
    break;
  case Scenario::UTT:
    if (C.empty())
      throw LabelError("UTT assemblage needs a Charlie factor");
    require_names(t, with({"BI", "BO"}, C), w.scenario);
    break;
  case Scenario::UUT:
    if (C.empty())
      throw LabelError("UUT assemblage needs a Charlie factor");
    require_names(t, C, w.scenario);
    parties = 2;
    break;
  }
  if (w.settings.size() != parties || w.outcomes.size() != parties)
    throw std::invalid_argument("index shape does not fit the scenario");
  for (const auto *vs : {&w.settings, &w.outcomes})
    for (Index v : *vs)
      if (v < 1)
        throw std::invalid_argument("index ranges must be positive");
}

void check_elements(const Assemblage &w) {
  check_layout(w);
  if (Index(w.elements.size()) != w.setting_count() * w.outcome_count())
    throw std::invalid_argument("element count does not match the index shape");
  for (const auto &e : w.elements)
    if (!(e.space() == w.trusted))
      throw LabelError("assemblage element on the wrong space");
}

// Trace of the outcome sum required by the scenario.
double required_trace(const Assemblage &w) {
  const auto &t = w.trusted;
  switch (w.scenario) {
  case Scenario::SDI:
  case Scenario::UTT:
    return double(t.dim_of("BO"));
  case Scenario::TTU:
    return double(t.dim_of("AO") * t.dim_of("BO"));
  case Scenario::TUU:
    return double(t.dim_of("AO"));
  case Scenario::UUT:
    return 1.0;
  }
  return 1.0;
}

// --- linear conditions, shared between programs and residual checks ---------

LabeledOperator apply_to(const LinearIdentity &id, const LabeledOperator &x,
                         const TensorSpace &) {
  return apply_identity(id, x);
}
Expr apply_to(const LinearIdentity &id, const Expr &x, const TensorSpace &space) {
  return apply_identity(id, x, space);
}

template <typename T> struct Family {
  const Assemblage &shape;
  const std::vector<T> &x;

  Index O() const { return shape.outcome_count(); }
  const T &at(Index s, Index o) const { return x[std::size_t(s * O() + o)]; }
  T sum(Index s, const std::function<bool(const std::vector<Index> &)> &keep) const {
    std::optional<T> acc;
    for (Index o = 0; o < O(); ++o)
      if (keep(shape.outcome_tuple(o)))
        acc = acc ? *acc + at(s, o) : at(s, o);
    return *acc;
  }
  T total(Index s) const {
    return sum(s, [](const std::vector<Index> &) { return true; });
  }
  Index setting(const std::vector<Index> &t) const { return undigits(t, shape.settings); }
};

// Sink: zero(name, T) for operators that must vanish, zero_trace(name, T)
// for operators whose trace must vanish.
template <typename T, typename Sink>
void validity_conditions(const Assemblage &sh, const std::vector<T> &x, Sink &&sink) {
  Family<T> f{sh, x};
  const TensorSpace &t = sh.trusted;
  const LabelSet C = charlie_of(t);
  const Index S = sh.setting_count();
  switch (sh.scenario) {
  case Scenario::SDI: {
    const LinearIdentity bo = same_after("BO", {}, {"BO"});
    for (Index s = 0; s < S; ++s)
      sink.zero("BO", apply_to(bo, f.total(s), t));
    break;
  }
  case Scenario::TTU: {
    for (Index s = 1; s < S; ++s)
      sink.zero("same sum", f.total(s) - f.total(0));
    for (const auto &id : validity_identities(PartyStructure::infer(t)))
      sink.zero(id.name, apply_to(id, f.total(0), t));
    break;
  }
  case Scenario::TUU: {
    const LinearIdentity ao = same_after("AO", {}, {"AO"});
    const Index IB = sh.settings[0], IC = sh.settings[1], OB = sh.outcomes[0];
    for (Index y = 0; y < IB; ++y) {
      for (Index z = 1; z < IC; ++z)
        for (Index b = 0; b < OB; ++b) {
          auto keep = [b](const std::vector<Index> &o) { return o[0] == b; };
          sink.zero("charlie last", f.sum(f.setting({y, z}), keep) - f.sum(f.setting({y, 0}), keep));
        }
      for (Index z = 0; z < IC; ++z)
        sink.zero("AO", apply_to(ao, f.total(f.setting({y, z})), t));
    }
    break;
  }
  case Scenario::UTT: {
    const LinearIdentity bo = same_after("BO", C, with({"BO"}, C));
    for (Index s = 0; s < S; ++s)
      sink.zero("BO", apply_to(bo, f.total(s), t));
    break;
  }
  case Scenario::UUT:
    break;
  }
}

template <typename T, typename Sink>
void order_conditions(const Assemblage &sh, bool first, const std::vector<T> &x,
                      Sink &&sink) {
  validity_conditions(sh, x, sink);
  Family<T> f{sh, x};
  const TensorSpace &t = sh.trusted;
  const LabelSet C = charlie_of(t);
  const Index S = sh.setting_count(), O = sh.outcome_count();
  switch (sh.scenario) {
  case Scenario::SDI:
    if (first) {
      const LinearIdentity bo = same_after("A first", {}, {"BO"});
      for (Index s = 0; s < S; ++s)
        for (Index o = 0; o < O; ++o)
          sink.zero("A first", apply_to(bo, f.at(s, o), t));
      for (Index s = 1; s < S; ++s)
        sink.zero_trace("weight", f.total(s) - f.total(0));
    } else {
      for (Index s = 1; s < S; ++s)
        sink.zero("B first", f.total(s) - f.total(0));
    }
    break;
  case Scenario::TTU: {
    const PartyStructure ps = PartyStructure::infer(t);
    for (const auto &id : order_identities(ps, first ? Order::AB : Order::BA))
      sink.zero(id.name, apply_to(id, f.total(0), t));
    break;
  }
  case Scenario::TUU: {
    const Index IB = sh.settings[0], IC = sh.settings[1], OB = sh.outcomes[0];
    if (first) {
      for (Index s = 1; s < S; ++s)
        sink.zero("A first", f.total(s) - f.total(0));
    } else {
      const LinearIdentity ao = same_after("B first", {}, {"AO"});
      for (Index y = 0; y < IB; ++y)
        for (Index z = 0; z < IC; ++z)
          for (Index b = 0; b < OB; ++b)
            sink.zero("B first",
                      apply_to(ao, f.sum(f.setting({y, z}),
                                         [b](const std::vector<Index> &o) { return o[0] == b; }),
                               t));
      for (Index s = 1; s < S; ++s)
        sink.zero_trace("weight", f.total(s) - f.total(0));
    }
    break;
  }
  case Scenario::UTT:
    if (first) {
      const LinearIdentity bo = same_after("A first", C, with({"BO"}, C));
      for (Index s = 0; s < S; ++s)
        for (Index o = 0; o < O; ++o)
          sink.zero("A first", apply_to(bo, f.at(s, o), t));
      for (Index s = 1; s < S; ++s)
        sink.zero_trace("weight", f.total(s) - f.total(0));
    } else {
      const LinearIdentity tc{"B first", C, {}};
      for (Index s = 1; s < S; ++s)
        sink.zero("B first", apply_to(tc, f.total(s) - f.total(0), t));
    }
    break;
  case Scenario::UUT: {
    const Index IA = sh.settings[0], IB = sh.settings[1];
    const Index OA = sh.outcomes[0], OB = sh.outcomes[1];
    if (first) {
      for (Index x = 0; x < IA; ++x)
        for (Index a = 0; a < OA; ++a)
          for (Index y = 1; y < IB; ++y) {
            auto keep = [a](const std::vector<Index> &o) { return o[0] == a; };
            sink.zero_trace("A first", f.sum(f.setting({x, y}), keep) - f.sum(f.setting({x, 0}), keep));
          }
      for (Index x = 1; x < IA; ++x)
        sink.zero_trace("weight", f.total(f.setting({x, 0})) - f.total(0));
    } else {
      for (Index y = 0; y < IB; ++y)
        for (Index b = 0; b < OB; ++b)
          for (Index x = 1; x < IA; ++x) {
            auto keep = [b](const std::vector<Index> &o) { return o[1] == b; };
            sink.zero_trace("B first", f.sum(f.setting({x, y}), keep) - f.sum(f.setting({0, y}), keep));
          }
      for (Index y = 1; y < IB; ++y)
        sink.zero_trace("weight", f.total(f.setting({0, y})) - f.total(0));
    }
    break;
  }
  }
}

struct ProgramSink {
  Program &p;
  Index n;
  void zero(const std::string &, const Expr &e) const {
    p.add_equality(e, MatrixC::Zero(n, n));
  }
  void zero_trace(const std::string &, const Expr &e) const {
    p.add_equality(conic::trace(e), 0.0);
  }
};

struct ResidualSink {
  ResidualReport &r;
  std::string prefix;
  void record(const std::string &name, double v) const {
    const std::string key = prefix + name;
    for (auto &item : r.items)
      if (item.name == key) {
        item.value = std::max(item.value, v);
        return;
      }
    r.items.push_back({key, v});
  }
  void zero(const std::string &name, const LabeledOperator &e) const {
    record(name, e.matrix().norm());
  }
  void zero_trace(const std::string &name, const LabeledOperator &e) const {
    record(name, std::abs(e.trace()));
  }
};

std::vector<Expr> expressions(const Program &p, const std::vector<conic::Var> &vars) {
  std::vector<Expr> out;
  out.reserve(vars.size());
  for (auto v : vars)
    out.push_back(p(v));
  return out;
}

std::vector<conic::Var> add_elements(Program &p, const Assemblage &sh, const char *name) {
  std::vector<conic::Var> v;
  const std::size_t n = std::size_t(sh.setting_count() * sh.outcome_count());
  for (std::size_t e = 0; e < n; ++e)
    v.push_back(p.add_psd(sh.trusted.dim(), name));
  return v;
}

// Largest negative part of the conic duals: shifting every element's
// functional by this multiple of the identity makes it exact on the cone.
double dual_shift(const conic::SolveReport &r, const Program &p,
                  const AssemblageCone &cone) {
  double delta = 0;
  for (const auto *vs : {&cone.first, &cone.second})
    for (auto v : *vs)
      delta = std::max(delta, -std::min(0.0, min_eigenvalue(r.conic_dual_matrix(p, v))));
  return delta;
}

AssemblageDecomposition decomposition_from(const conic::SolveReport &r, const Program &p,
                                           const AssemblageCone &cone, const Assemblage &sh) {
  AssemblageDecomposition d;
  for (auto v : cone.first)
    d.first.emplace_back(sh.trusted, hermitian_part(r.matrix(p, v)));
  for (auto v : cone.second)
    d.second.emplace_back(sh.trusted, hermitian_part(r.matrix(p, v)));
  double t = 0;
  for (Index o = 0; o < sh.outcome_count(); ++o)
    t += d.first[std::size_t(o)].trace().real();
  d.q = std::clamp(t / required_trace(sh), 0.0, 1.0);
  return d;
}

} // namespace

double Assemblage::normalization() const {
  double t = 0;
  for (Index o = 0; o < outcome_count(); ++o)
    t += elements.at(std::size_t(o)).trace().real();
  return t;
}

// --- from processes ----------------------------------------------------------

Assemblage assemblage_from_process(const LabeledOperator &W, const Devices &u,
                                   Scenario s) {
  Assemblage w;
  w.scenario = s;
  auto need_a = [&]() -> const InstrumentSet & {
    if (!u.alice)
      throw std::invalid_argument("scenario needs Alice's instruments");
    return *u.alice;
  };
  auto need_b = [&]() -> const InstrumentSet & {
    if (!u.bob)
      throw std::invalid_argument("scenario needs Bob's instruments");
    return *u.bob;
  };
  auto need_c = [&]() -> const POVMSet & {
    if (!u.charlie)
      throw std::invalid_argument("scenario needs Charlie's measurements");
    return *u.charlie;
  };
  switch (s) {
  case Scenario::SDI:
  case Scenario::UTT: {
    const auto &A = need_a();
    w.settings = {A.settings()};
    w.outcomes = {A.outcomes()};
    for (Index x = 0; x < A.settings(); ++x)
      for (Index a = 0; a < A.outcomes(); ++a)
        w.elements.push_back(contract(W, A(x, a)));
    break;
  }
  case Scenario::TTU: {
    const auto &M = need_c();
    w.settings = {M.settings()};
    w.outcomes = {M.outcomes()};
    for (Index z = 0; z < M.settings(); ++z)
      for (Index c = 0; c < M.outcomes(); ++c)
        w.elements.push_back(contract(W, M(z, c)));
    break;
  }
  case Scenario::TUU: {
    const auto &B = need_b();
    const auto &M = need_c();
    w.settings = {B.settings(), M.settings()};
    w.outcomes = {B.outcomes(), M.outcomes()};
    w.elements.resize(std::size_t(w.setting_count() * w.outcome_count()));
    for (Index y = 0; y < B.settings(); ++y)
      for (Index b = 0; b < B.outcomes(); ++b) {
        const LabeledOperator wb = contract(W, B(y, b));
        for (Index z = 0; z < M.settings(); ++z)
          for (Index c = 0; c < M.outcomes(); ++c)
            w.elements[w.flat({y, z}, {b, c})] = contract(wb, M(z, c));
      }
    break;
  }
  case Scenario::UUT: {
    const auto &A = need_a();
    const auto &B = need_b();
    w.settings = {A.settings(), B.settings()};
    w.outcomes = {A.outcomes(), B.outcomes()};
    w.elements.resize(std::size_t(w.setting_count() * w.outcome_count()));
    for (Index x = 0; x < A.settings(); ++x)
      for (Index a = 0; a < A.outcomes(); ++a) {
        const LabeledOperator wa = contract(W, A(x, a));
        for (Index y = 0; y < B.settings(); ++y)
          for (Index b = 0; b < B.outcomes(); ++b)
            w.elements[w.flat({x, y}, {a, b})] = contract(wa, B(y, b));
      }
    break;
  }
  }
  w.trusted = w.elements.at(0).space();
  check_elements(w);
  return w;
}

ResidualReport validate_assemblage(const Assemblage &w) {
  check_elements(w);
  ResidualReport r;
  double herm = 0;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto &e : w.elements) {
    herm = std::max(herm, (e.matrix() - e.matrix().adjoint()).norm());
    r.min_eigenvalue = std::min(r.min_eigenvalue, min_eigenvalue(e.matrix()));
  }
  r.items.push_back({"hermitian", herm});
  double tr = 0;
  Family<LabeledOperator> f{w, w.elements};
  for (Index s = 0; s < w.setting_count(); ++s)
    tr = std::max(tr, std::abs(f.total(s).trace().real() - required_trace(w)));
  r.items.push_back({"trace", tr});
  validity_conditions(w, w.elements, ResidualSink{r, ""});
  r.passed = r.worst() <= kResidualTol && r.min_eigenvalue >= -kPsdTol;
  return r;
}

// --- causal membership -------------------------------------------------------

AssemblageCone add_causal_assemblage_cone(Program &p, const Assemblage &shape) {
  check_layout(shape);
  AssemblageCone c{add_elements(p, shape, "w1"), add_elements(p, shape, "w2")};
  const ProgramSink sink{p, shape.trusted.dim()};
  order_conditions(shape, true, expressions(p, c.first), sink);
  order_conditions(shape, false, expressions(p, c.second), sink);
  return c;
}

CausalAssemblageResult is_causal_assemblage(const Assemblage &w,
                                            const conic::SolverOptions &opt) {
  const ResidualReport v = validate_assemblage(w);
  if (v.worst() > 1e-6 || v.min_eigenvalue < -1e-8)
    throw std::invalid_argument("assemblage is not valid");
  Program p;
  const AssemblageCone cone = add_causal_assemblage_cone(p, w);
  std::vector<std::size_t> rows;
  for (std::size_t e = 0; e < w.elements.size(); ++e)
    rows.push_back(p.add_equality(p(cone.first[e]) + p(cone.second[e]),
                                  w.elements[e].matrix()));
  auto r = conic::solve(p, opt);
  CausalAssemblageResult res;
  res.outer_approximation = w.scenario == Scenario::TUU || w.scenario == Scenario::UTT ||
                            w.scenario == Scenario::UUT;
  if (r.status == Status::optimal) {
    res.causal = true;
    res.decomposition = decomposition_from(r, p, cone, w);
    res.slack = r.slack;
    return res;
  }
  if (r.status != Status::infeasible)
    throw SolverFailure("assemblage membership program did not converge");
  const double delta = dual_shift(r, p, cone);
  AssemblageWitness wit;
  for (std::size_t e = 0; e < w.elements.size(); ++e) {
    LabeledOperator F(w.trusted, hermitian_part(r.multiplier(p, rows[e])));
    wit.F.push_back(F + delta * identity_on(w.trusted));
  }
  wit.value = witness_value(wit, w);
  if (wit.value >= 0)
    throw SolverFailure("extracted witness does not separate the assemblage");
  res.witness = std::move(wit);
  return res;
}

double witness_value(const AssemblageWitness &f, const Assemblage &w) {
  if (f.F.size() != w.elements.size())
    throw std::invalid_argument("witness does not match the assemblage");
  double v = 0;
  for (std::size_t e = 0; e < w.elements.size(); ++e)
    v += (f.F[e].matrix() * w.elements[e].matrix()).trace().real();
  return v;
}

ResidualReport verify_assemblage_decomposition(const Assemblage &w,
                                               const AssemblageDecomposition &d) {
  check_elements(w);
  if (d.first.size() != w.elements.size() || d.second.size() != w.elements.size())
    throw std::invalid_argument("decomposition does not match the assemblage");
  ResidualReport r;
  double sum = 0;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < w.elements.size(); ++e) {
    sum = std::max(sum, (d.first[e] + d.second[e] - w.elements[e]).matrix().cwiseAbs().maxCoeff());
    r.min_eigenvalue = std::min({r.min_eigenvalue, min_eigenvalue(d.first[e].matrix()),
                                 min_eigenvalue(d.second[e].matrix())});
  }
  r.items.push_back({"sum", sum});
  order_conditions(w, true, d.first, ResidualSink{r, "first "});
  order_conditions(w, false, d.second, ResidualSink{r, "second "});
  double t = 0;
  for (Index o = 0; o < w.outcome_count(); ++o)
    t += d.first[std::size_t(o)].trace().real();
  r.items.push_back({"q", std::abs(t / required_trace(w) - d.q)});
  r.passed = r.worst() <= 1e-7 && r.min_eigenvalue >= -kPsdTol;
  return r;
}

// --- semi-device-independent certification -----------------------------------

namespace {

struct Entry {
  std::size_t element;
  LabeledOperator K;
};

TensorSpace trusted_space(Scenario s, const Devices &t) {
  auto need = [](bool ok) {
    if (!ok)
      throw std::invalid_argument("trusted devices do not fit the scenario");
  };
  switch (s) {
  case Scenario::SDI:
    need(t.bob.has_value());
    return t.bob->space();
  case Scenario::TTU:
    need(t.alice && t.bob);
    return concat(t.alice->space(), t.bob->space());
  case Scenario::TUU:
    need(t.alice.has_value());
    return t.alice->space();
  case Scenario::UTT:
    need(t.bob && t.charlie);
    return concat(t.bob->space(), TensorSpace{t.charlie->space});
  case Scenario::UUT:
    need(t.charlie.has_value());
    return TensorSpace{t.charlie->space};
  }
  return {};
}

// Untrusted index shape and trusted shape of a full behaviour.
Assemblage shape_for(const Behaviour &p, const Devices &t, Scenario s) {
  Assemblage sh;
  sh.scenario = s;
  sh.trusted = trusted_space(s, t);
  const bool tri = s != Scenario::SDI;
  if (p.tripartite() != tri)
    throw std::invalid_argument("behaviour arity does not fit the scenario");
  std::vector<std::size_t> untrusted;
  std::vector<Index> ts, to;
  auto trusted_party = [&](std::size_t k, Index settings, Index outcomes) {
    if (p.settings[k] != settings || p.outcomes[k] != outcomes)
      throw std::invalid_argument("behaviour shape does not match the trusted devices");
  };
  switch (s) {
  case Scenario::SDI:
    untrusted = {0};
    trusted_party(1, t.bob->settings(), t.bob->outcomes());
    break;
  case Scenario::TTU:
    untrusted = {2};
    trusted_party(0, t.alice->settings(), t.alice->outcomes());
    trusted_party(1, t.bob->settings(), t.bob->outcomes());
    break;
  case Scenario::TUU:
    untrusted = {1, 2};
    trusted_party(0, t.alice->settings(), t.alice->outcomes());
    break;
  case Scenario::UTT:
    untrusted = {0};
    trusted_party(1, t.bob->settings(), t.bob->outcomes());
    trusted_party(2, t.charlie->settings(), t.charlie->outcomes());
    break;
  case Scenario::UUT:
    untrusted = {0, 1};
    trusted_party(2, t.charlie->settings(), t.charlie->outcomes());
    break;
  }
  for (auto k : untrusted) {
    sh.settings.push_back(p.settings[k]);
    sh.outcomes.push_back(p.outcomes[k]);
  }
  check_layout(sh);
  return sh;
}

// Behaviour entries as (element, trusted operator) pairs, in behaviour order.
std::vector<Entry> entries(const Behaviour &p, const Assemblage &sh, const Devices &t) {
  std::vector<Entry> out;
  out.reserve(p.p.size());
  for (Index s = 0; s < p.setting_count(); ++s) {
    const auto in = p.setting_tuple(s);
    for (Index o = 0; o < p.outcome_count(); ++o) {
      const auto ou = p.outcome_tuple(o);
      switch (sh.scenario) {
      case Scenario::SDI:
        out.push_back({sh.flat({in[0]}, {ou[0]}), (*t.bob)(in[1], ou[1])});
        break;
      case Scenario::TTU:
        out.push_back({sh.flat({in[2]}, {ou[2]}),
                       permute_to(tensor((*t.alice)(in[0], ou[0]), (*t.bob)(in[1], ou[1])),
                                  sh.trusted)});
        break;
      case Scenario::TUU:
        out.push_back({sh.flat({in[1], in[2]}, {ou[1], ou[2]}), (*t.alice)(in[0], ou[0])});
        break;
      case Scenario::UTT:
        out.push_back({sh.flat({in[0]}, {ou[0]}),
                       permute_to(tensor((*t.bob)(in[1], ou[1]), (*t.charlie)(in[2], ou[2])),
                                  sh.trusted)});
        break;
      case Scenario::UUT:
        out.push_back({sh.flat({in[0], in[1]}, {ou[0], ou[1]}), (*t.charlie)(in[2], ou[2])});
        break;
      }
    }
  }
  return out;
}

Behaviour behaviour_shape(const Assemblage &w, const Devices &t) {
  auto st = [](const auto &d) { return std::pair{d.settings(), d.outcomes()}; };
  std::vector<std::pair<Index, Index>> parties;
  switch (w.scenario) {
  case Scenario::SDI:
    parties = {{w.settings[0], w.outcomes[0]}, st(*t.bob)};
    break;
  case Scenario::TTU:
    parties = {st(*t.alice), st(*t.bob), {w.settings[0], w.outcomes[0]}};
    break;
  case Scenario::TUU:
    parties = {st(*t.alice), {w.settings[0], w.outcomes[0]}, {w.settings[1], w.outcomes[1]}};
    break;
  case Scenario::UTT:
    parties = {{w.settings[0], w.outcomes[0]}, st(*t.bob), st(*t.charlie)};
    break;
  case Scenario::UUT:
    parties = {{w.settings[0], w.outcomes[0]}, {w.settings[1], w.outcomes[1]}, st(*t.charlie)};
    break;
  }
  std::vector<Index> s, o;
  for (auto [a, b] : parties) {
    s.push_back(a);
    o.push_back(b);
  }
  return Behaviour(s, o);
}

} // namespace

Behaviour behaviour_of(const Assemblage &w, const Devices &t) {
  check_elements(w);
  if (!(trusted_space(w.scenario, t) == w.trusted))
    throw LabelError("trusted devices do not act on the assemblage's space");
  Behaviour p = behaviour_shape(w, t);
  const auto es = entries(p, w, t);
  for (std::size_t i = 0; i < es.size(); ++i)
    p.p[i] = (es[i].K.matrix() * w.elements[es[i].element].matrix()).trace().real();
  return p;
}

SDIResult certify_sdi(const Behaviour &input, const Devices &trusted, Scenario s,
                      const conic::SolverOptions &opt) {
  const Behaviour p = normalized(input);
  const Assemblage sh = shape_for(p, trusted, s);
  const auto es = entries(p, sh, trusted);

  Program prog;
  const AssemblageCone cone = add_causal_assemblage_cone(prog, sh);
  std::vector<std::size_t> rows;
  for (const auto &e : es)
    rows.push_back(prog.add_equality(Expr::inner(e.K.matrix(), cone.first[e.element]) +
                                         Expr::inner(e.K.matrix(), cone.second[e.element]),
                                     p.p[rows.size()]));
  auto r = conic::solve(prog, opt);
  SDIResult res;
  res.outer_approximation = s == Scenario::TUU || s == Scenario::UTT || s == Scenario::UUT;
  if (r.status == Status::optimal) {
    res.verdict = Verdict::not_certified;
    res.decomposition = decomposition_from(r, prog, cone, sh);
    Assemblage w = sh;
    for (std::size_t e = 0; e < res.decomposition->first.size(); ++e)
      w.elements.push_back(res.decomposition->first[e] + res.decomposition->second[e]);
    res.assemblage = std::move(w);
    return res;
  }
  if (r.status != Status::infeasible)
    throw SolverFailure("semi-device-independent program did not converge");

  // Tr(Z x) >= -delta * (total trace) on the cone, and the total trace of a
  // normalized causal assemblage is fixed; fold that into setting 0.
  const double total = double(sh.setting_count()) * required_trace(sh);
  const double shift = dual_shift(r, prog, cone) * total;
  Behaviour f(p.settings, p.outcomes);
  for (std::size_t e = 0; e < rows.size(); ++e)
    f.p[e] = r.dual[rows[e]](0);
  for (Index o = 0; o < p.outcome_count(); ++o)
    f.p[std::size_t(o)] += shift;
  res.functional = f;
  res.value = inequality_value(f, p);
  if (res.value >= 0)
    throw SolverFailure("extracted functional does not separate the behaviour");

  // is there any valid assemblage at all?
  Program valid;
  const auto vars = add_elements(valid, sh, "w");
  validity_conditions(sh, expressions(valid, vars), ProgramSink{valid, sh.trusted.dim()});
  for (std::size_t i = 0; i < es.size(); ++i)
    valid.add_equality(Expr::inner(es[i].K.matrix(), vars[es[i].element]), p.p[i]);
  auto rv = conic::solve(valid, opt);
  if (rv.status == Status::infeasible)
    res.verdict = Verdict::inconsistent_behaviour;
  else if (rv.status == Status::optimal)
    res.verdict = Verdict::certified_noncausal;
  else
    throw SolverFailure("assemblage consistency program did not converge");
  return res;
}

// --- realizations ------------------------------------------------------------

namespace {

constexpr double kSupportCut = 1e-10;

struct Purifier {
  MatrixC V;             // eigenvectors
  Eigen::VectorXd mu;    // eigenvalues, clipped at zero
  Eigen::VectorXd inv;   // mu^-1/2 on the support, 0 elsewhere

  explicit Purifier(const MatrixC &rho) {
    Eigen::SelfAdjointEigenSolver<MatrixC> es(hermitian_part(rho));
    V = es.eigenvectors();
    mu = es.eigenvalues().cwiseMax(0.0);
    inv = Eigen::VectorXd::Zero(mu.size());
    for (Index i = 0; i < mu.size(); ++i)
      if (mu(i) >= kSupportCut)
        inv(i) = 1.0 / std::sqrt(mu(i));
  }
  Index dim() const { return mu.size(); }
  // (K^+ x K^+dagger)^T with K = V sqrt(mu) (x) 1_rest
  MatrixC pulled_back(const MatrixC &x, Index rest) const {
    MatrixC k = kron(inv.asDiagonal() * V.adjoint(), MatrixC::Identity(rest, rest));
    return (k * x * k.adjoint()).transpose();
  }
  MatrixC null_projector(Index rest) const {
    Eigen::VectorXd z(mu.size());
    for (Index i = 0; i < mu.size(); ++i)
      z(i) = inv(i) == 0 ? 1.0 : 0.0;
    return kron(MatrixC(z.cast<cplx>().asDiagonal()), MatrixC::Identity(rest, rest));
  }
  // sum_{i,k} sqrt(mu_i) |i,k> (x) |v_i,k>, on (sector, own (x) rest)
  Eigen::VectorXcd purification(Index rest) const {
    const Index n = dim(), m = n * rest;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(m * m);
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < rest; ++k)
        for (Index j = 0; j < n; ++j)
          psi((i * rest + k) * m + j * rest + k) += std::sqrt(mu(i)) * V(j, i);
    return psi;
  }
};

void require_ordered(const Assemblage &w, const AssemblageDecomposition &d) {
  const ResidualReport r = verify_assemblage_decomposition(w, d);
  if (!(r.worst() <= 1e-6) || r.min_eigenvalue < -1e-8)
    throw std::invalid_argument("decomposition does not reproduce a causal assemblage");
}

double weight_of(const std::vector<LabeledOperator> &comp, const Assemblage &w) {
  double t = 0;
  for (Index o = 0; o < w.outcome_count(); ++o)
    t += comp[std::size_t(o)].trace().real();
  return t / required_trace(w);
}

AssemblageRealization realize_sdi(const Assemblage &w, const AssemblageDecomposition &d) {
  const Index dB = w.trusted.dim_of("BI"), dO = w.trusted.dim_of("BO");
  const Index IA = w.settings[0], OA = w.outcomes[0];
  const double q = weight_of(d.first, w);
  const bool has_ab = q > 0, has_ba = weight_of(d.second, w) > 0;
  const Index sector = has_ba ? dB * dO : 0;
  const SpaceLabel AI{"AI", sector + (has_ab ? 1 : 0)}, AO{"AO", dB};
  const SpaceLabel BI{"BI", dB}, BO{"BO", dO};
  const TensorSpace space{AI, AO, BI, BO};
  const Index first = AI.dim - 1;

  std::vector<std::vector<MatrixC>> Am(IA, std::vector<MatrixC>(OA, MatrixC::Zero(AI.dim * AO.dim, AI.dim * AO.dim)));
  const LabeledOperator zero = LabeledOperator::zero(space);
  AssemblageRealization r{zero, PartyStructure::infer(space), {}, {q, zero, zero, 0}};

  if (has_ab) {
    // Alice prepares sigma_{a|x} and sends it to Bob
    r.decomposition.first =
        q * permute_to(tensor(on(AI, diag_projector(AI.dim, first)), embedding_choi(AO, BI),
                              identity_on(TensorSpace{BO})),
                       space);
    for (Index x = 0; x < IA; ++x)
      for (Index a = 0; a < OA; ++a) {
        const MatrixC sigma = partial_trace(d.first[w.flat({x}, {a})], {"BO"}).matrix() / double(dO);
        Am[x][a] += kron(diag_projector(AI.dim, first), sigma.transpose() / q);
      }
  }
  if (has_ba) {
    // Bob's input purified into Alice's input, Bob's output wired to it
    Family<LabeledOperator> f{w, d.second};
    const Purifier pur(partial_trace(f.total(0), {"BO"}).matrix() / double(dO));
    const Eigen::VectorXcd psi = pur.purification(dO);
    const SpaceLabel sec{"AI", sector};
    LabeledOperator wba = tensor(LabeledOperator(TensorSpace{sec, BI, BO}, ket_projector(psi)),
                                 identity_on(TensorSpace{AO}));
    // the sector sits at the top of Alice's input
    MatrixC full = MatrixC::Zero(space.dim(), space.dim());
    const Index rest = AO.dim * dB * dO;
    full.topLeftCorner(sector * rest, sector * rest) = permute_to(wba, TensorSpace{sec, AO, BI, BO}).matrix();
    r.decomposition.second = LabeledOperator(space, full);
    const MatrixC null = pur.null_projector(dO);
    for (Index x = 0; x < IA; ++x)
      for (Index a = 0; a < OA; ++a) {
        MatrixC X = pur.pulled_back(d.second[w.flat({x}, {a})].matrix(), dO);
        if (a == 0)
          X += null;
        Am[x][a] += kron(padded(X, AI.dim), MatrixC::Identity(AO.dim, AO.dim) / double(AO.dim));
      }
  }
  r.W = r.decomposition.first + r.decomposition.second;
  r.untrusted.alice = InstrumentSet(AI, AO, Am);
  return r;
}

// Each component purified in its own block of Charlie's input.
AssemblageRealization realize_ttu_sectors(const Assemblage &w,
                                          const std::vector<const std::vector<LabeledOperator> *> &comps,
                                          double q) {
  const Index n = w.trusted.dim();
  const Index IC = w.settings[0], OC = w.outcomes[0];
  const SpaceLabel CI{"CI", n * Index(comps.size())};
  const TensorSpace space = concat(w.trusted, TensorSpace{CI});
  const LabeledOperator zero = LabeledOperator::zero(space);
  AssemblageRealization r{zero, PartyStructure::infer(space), {}, {q, zero, zero, 0}};
  std::vector<std::vector<MatrixC>> Mm(IC, std::vector<MatrixC>(OC, MatrixC::Zero(CI.dim, CI.dim)));
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const auto &comp = *comps[k];
    Family<LabeledOperator> f{w, comp};
    const Purifier pur(f.total(0).matrix());
    const Index off = Index(k) * n;
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(space.dim());
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        v(j * CI.dim + off + i) = std::sqrt(pur.mu(i)) * pur.V(j, i);
    LabeledOperator part(space, ket_projector(v));
    (k == 0 ? r.decomposition.first : r.decomposition.second) = part;
    const MatrixC null = pur.null_projector(1);
    for (Index z = 0; z < IC; ++z)
      for (Index c = 0; c < OC; ++c) {
        MatrixC X = pur.pulled_back(comp[w.flat({z}, {c})].matrix(), 1);
        if (c == 0)
          X += null;
        Mm[z][c].block(off, off, n, n) += X;
      }
  }
  r.W = r.decomposition.first + r.decomposition.second;
  r.untrusted.charlie = POVMSet(CI, Mm);
  return r;
}

AssemblageRealization realize_uut(const Assemblage &w, const AssemblageDecomposition &d) {
  const LabelSet C = charlie_of(w.trusted);
  if (C.size() != 1)
    throw LabelError("UUT realization needs a single Charlie factor");
  const Index dC = w.trusted.dim();
  const Index IA = w.settings[0], IB = w.settings[1];
  const Index OA = w.outcomes[0], OB = w.outcomes[1];
  const double q = weight_of(d.first, w);
  const bool has_ab = q > 0, has_ba = weight_of(d.second, w) > 0;
  const Index mA = OA * IA, mB = OB * IB;
  const Index dAO = std::max(mA, dC), dBO = std::max(mB, dC);
  const Index dAI = (has_ba ? dBO : 0) + (has_ab ? 1 : 0);
  const Index dBI = (has_ab ? dAO : 0) + (has_ba ? 1 : 0);
  const SpaceLabel AI{"AI", dAI}, AO{"AO", dAO}, BI{"BI", dBI}, BO{"BO", dBO};
  const SpaceLabel CI{C[0], dC};
  const TensorSpace space{AI, AO, BI, BO, CI};
  const LabeledOperator zero = LabeledOperator::zero(space);
  AssemblageRealization r{zero, PartyStructure::infer(space), {}, {q, zero, zero, 0}};

  std::vector<std::vector<MatrixC>> Am(IA, std::vector<MatrixC>(OA, MatrixC::Zero(dAI * dAO, dAI * dAO)));
  std::vector<std::vector<MatrixC>> Bm(IB, std::vector<MatrixC>(OB, MatrixC::Zero(dBI * dBO, dBI * dBO)));
  const MatrixC ground = diag_projector(dC, 0);

  for (bool ab : {true, false}) {
    if (ab ? !has_ab : !has_ba)
      continue;
    const auto &comp = ab ? d.first : d.second;
    const double weight = ab ? q : weight_of(d.second, w);
    // p(ab|xy) and Charlie's normalized state
    auto joint = [&](Index x, Index y, Index a, Index b) {
      return std::max(0.0, comp[w.flat({x, y}, {a, b})].trace().real()) / weight;
    };
    auto state = [&](Index x, Index y, Index a, Index b) -> MatrixC {
      const LabeledOperator &e = comp[w.flat({x, y}, {a, b})];
      const double t = e.trace().real();
      return t > 1e-14 ? MatrixC(hermitian_part(e.matrix()) / t) : ground;
    };
    // marginal of the party acting first, by its own setting and outcome
    auto marginal = [&](Index s, Index o) {
      double m = 0;
      if (ab)
        for (Index b = 0; b < OB; ++b)
          m += joint(s, 0, o, b);
      else
        for (Index a = 0; a < OA; ++a)
          m += joint(0, s, a, o);
      return m;
    };
    const SpaceLabel &in1 = ab ? AI : BI, &out1 = ab ? AO : BO;
    const SpaceLabel &in2 = ab ? BI : AI, &out2 = ab ? BO : AO;
    LabeledOperator wk = tensor(on(in1, diag_projector(in1.dim, in1.dim - 1)),
                                embedding_choi(out1, in2), embedding_choi(out2, CI));
    (ab ? r.decomposition.first : r.decomposition.second) = weight * permute_to(wk, space);

    auto &first = ab ? Am : Bm;
    auto &second = ab ? Bm : Am;
    const Index I1 = ab ? IA : IB, O1 = ab ? OA : OB, I2 = ab ? IB : IA, O2 = ab ? OB : OA;
    const Index din1 = in1.dim, dout1 = out1.dim, din2 = in2.dim, dout2 = out2.dim;
    for (Index s = 0; s < I1; ++s)
      for (Index o = 0; o < O1; ++o)
        first[s][o] += kron(diag_projector(din1, din1 - 1),
                            marginal(s, o) * diag_projector(dout1, o * I1 + s));
    for (Index t = 0; t < I2; ++t)
      for (Index o2 = 0; o2 < O2; ++o2)
        for (Index k = 0; k < dout1; ++k) {
          MatrixC out;
          if (k < O1 * I1) {
            const Index s = k % I1, o1 = k / I1;
            const Index x = ab ? s : t, y = ab ? t : s;
            const Index a = ab ? o1 : o2, b = ab ? o2 : o1;
            const double m = marginal(s, o1);
            const double cond = m > 1e-14 ? joint(x, y, a, b) / m : (o2 == 0 ? 1.0 : 0.0);
            out = cond * padded(state(x, y, a, b).transpose(), dout2);
          } else {
            out = o2 == 0 ? padded(ground, dout2) : MatrixC::Zero(dout2, dout2);
          }
          second[t][o2] += kron(diag_projector(din2, k), out);
        }
  }
  r.W = r.decomposition.first + r.decomposition.second;
  r.untrusted.alice = InstrumentSet(AI, AO, Am);
  r.untrusted.bob = InstrumentSet(BI, BO, Bm);
  return r;
}

} // namespace

AssemblageRealization realize_causal_assemblage(const Assemblage &w,
                                                const AssemblageDecomposition &d) {
  check_elements(w);
  require_ordered(w, d);
  switch (w.scenario) {
  case Scenario::SDI:
    return realize_sdi(w, d);
  case Scenario::TTU: {
    std::vector<const std::vector<LabeledOperator> *> comps;
    if (weight_of(d.first, w) > 0)
      comps.push_back(&d.first);
    if (weight_of(d.second, w) > 0)
      comps.push_back(&d.second);
    AssemblageRealization r = realize_ttu_sectors(w, comps, weight_of(d.first, w));
    if (comps.size() == 1 && comps[0] == &d.second)
      std::swap(r.decomposition.first, r.decomposition.second);
    return r;
  }
  case Scenario::UUT:
    return realize_uut(w, d);
  default:
    throw std::invalid_argument(std::string("no realization is known for causal ") +
                                to_string(w.scenario) + " assemblages");
  }
}

AssemblageRealization realize_causal_assemblage(const Assemblage &w,
                                                const conic::SolverOptions &opt) {
  if (w.scenario == Scenario::TUU || w.scenario == Scenario::UTT)
    throw std::invalid_argument(std::string("no realization is known for causal ") +
                                to_string(w.scenario) + " assemblages");
  auto c = is_causal_assemblage(w, opt);
  if (!c.causal)
    throw std::invalid_argument("assemblage is not causal");
  return realize_causal_assemblage(w, *c.decomposition);
}

AssemblageRealization realize_ttu_assemblage(const Assemblage &w) {
  check_elements(w);
  if (w.scenario != Scenario::TTU)
    throw std::invalid_argument("general realization applies to TTU assemblages");
  const ResidualReport v = validate_assemblage(w);
  if (v.worst() > 1e-6 || v.min_eigenvalue < -1e-8)
    throw std::invalid_argument("assemblage is not valid");
  AssemblageRealization r = realize_ttu_sectors(w, {&w.elements}, 1.0);
  r.decomposition = {};
  return r;
}

CausalAssemblageSample random_causal_assemblage(Scenario s, std::uint64_t seed,
                                                Index max_range) {
  if (max_range < 2)
    throw std::invalid_argument("max_range must be at least 2");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(2, max_range);
  const bool tri = s != Scenario::SDI;
  const PartyStructure ps = tri ? PartyStructure::tripartite(2, 2, 2, 2, 2)
                                : PartyStructure::bipartite(2, 2, 2, 2);
  auto [o1, o2] = orders_for(ps);
  const LabeledOperator w1 = random_ordered_process(ps, o1, rng);
  const LabeledOperator w2 = random_ordered_process(ps, o2, rng);
  const double q = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
  Devices u;
  auto alice = [&] { u.alice = random_instrument(2, 2, pick(rng), pick(rng), rng, "AI", "AO"); };
  auto bob = [&] { u.bob = random_instrument(2, 2, pick(rng), pick(rng), rng, "BI", "BO"); };
  auto charlie = [&] { u.charlie = random_povm(2, pick(rng), pick(rng), rng, ps.charlie.at(0)); };
  switch (s) {
  case Scenario::SDI:
  case Scenario::UTT:
    alice();
    break;
  case Scenario::TTU:
    charlie();
    break;
  case Scenario::TUU:
    bob();
    charlie();
    break;
  case Scenario::UUT:
    alice();
    bob();
    break;
  }
  CausalAssemblageSample out;
  const Assemblage a = assemblage_from_process(q * w1, u, s);
  const Assemblage b = assemblage_from_process((1 - q) * w2, u, s);
  out.assemblage = a;
  for (std::size_t e = 0; e < a.elements.size(); ++e)
    out.assemblage.elements[e] += b.elements[e];
  out.decomposition = {q, a.elements, b.elements};
  return out;
}

Assemblage nonprocess_assemblage_example() {
  Assemblage w;
  w.scenario = Scenario::SDI;
  w.trusted = TensorSpace{{"BI", 2}, {"BO", 2}};
  w.settings = {2};
  w.outcomes = {2};
  for (Index x = 0; x < 2; ++x)
    for (Index a = 0; a < 2; ++a)
      w.elements.emplace_back(w.trusted, kron(diag_projector(2, x), diag_projector(2, a)));
  return w;
}

} // namespace causalis
