#include "causalis/process.hpp"

#include <map>
#include <random>

namespace causalis {

using conic::Expr;
using conic::Program;
using conic::SparseMatrix;
using conic::Status;

PartyStructure PartyStructure::bipartite(Index ai, Index ao, Index bi, Index bo) {
  return {TensorSpace{{"AI", ai}, {"AO", ao}, {"BI", bi}, {"BO", bo}}, {}};
}

PartyStructure PartyStructure::tripartite(Index ai, Index ao, Index bi,
                                          Index bo, Index ci) {
  return {TensorSpace{{"AI", ai}, {"AO", ao}, {"BI", bi}, {"BO", bo}, {"CI", ci}},
          {"CI"}};
}

PartyStructure PartyStructure::infer(const TensorSpace &space) {
  for (const char *l : {"AI", "AO", "BI", "BO"})
    if (!space.contains(l))
      throw LabelError(std::string("process space lacks ") + l);
  PartyStructure s{space, {}};
  for (const auto &f : space.factors())
    if (!f.name.empty() && f.name[0] == 'C')
      s.charlie.push_back(f.name);
  if (space.size() != 4 + s.charlie.size())
    throw LabelError("unrecognized factor in process space");
  return s;
}

LinearIdentity same_after(std::string name, const LabelSet &small,
                          const LabelSet &large) {
  LabelSet rest;
  for (const auto &l : large)
    if (std::find(small.begin(), small.end(), l) == small.end())
      rest.push_back(l);
  return {std::move(name), small, {rest}};
}

LabeledOperator project_kernel(const std::vector<LinearIdentity> &ids,
                               const LabeledOperator &w) {
  LabeledOperator x = w;
  for (const auto &id : ids)
    x = x - apply_identity(id, x);
  return x;
}

namespace {

std::string cache_key(const LinearIdentity &id, const TensorSpace &space) {
  std::string k;
  for (const auto &f : space.factors())
    k += f.name + ":" + std::to_string(f.dim) + ",";
  k += "|";
  for (const auto &l : id.base)
    k += l + ",";
  for (const auto &f : id.factors) {
    k += "|";
    for (const auto &l : f)
      k += l + ",";
  }
  return k;
}

LabelSet with(LabelSet a, const LabelSet &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

} // namespace

const SparseMatrix &identity_map(const LinearIdentity &id,
                                 const TensorSpace &space) {
  thread_local std::map<std::string, SparseMatrix> cache;
  const std::string key = cache_key(id, space);
  auto it = cache.find(key);
  if (it != cache.end())
    return it->second;
  const Index n = space.dim();
  SparseMatrix m = conic::superoperator(n, n, [&](const MatrixC &x) -> MatrixC {
    return apply_identity(id, LabeledOperator(space, x)).matrix();
  });
  return cache.emplace(key, std::move(m)).first->second;
}

Expr apply_identity(const LinearIdentity &id, const Expr &e, const TensorSpace &space) {
  return e.mapped(identity_map(id, space), space.dim());
}

const char *to_string(Order o) {
  switch (o) {
  case Order::AB:
    return "A<B";
  case Order::BA:
    return "B<A";
  case Order::ABC:
    return "A<B<C";
  case Order::BAC:
    return "B<A<C";
  }
  return "?";
}

std::vector<LinearIdentity> validity_identities(const PartyStructure &s) {
  const LabelSet C = s.charlie;
  return {
      same_after("AI AO", with({"AI", "AO"}, C), with({"AI", "AO", "BO"}, C)),
      same_after("BI BO", with({"BI", "BO"}, C), with({"AO", "BI", "BO"}, C)),
      {"no loops", C, {{"AO"}, {"BO"}}},
  };
}

std::vector<LinearIdentity> order_identities(const PartyStructure &s, Order o) {
  const LabelSet C = s.charlie;
  const bool tri = s.tripartite();
  if (tri != (o == Order::ABC || o == Order::BAC))
    throw LabelError(std::string("order ") + to_string(o) +
                     " does not fit the party structure");
  if (o == Order::AB || o == Order::ABC)
    return {same_after("B last", C, with({"BO"}, C)),
            same_after("BI BO", with({"BI", "BO"}, C), with({"AO", "BI", "BO"}, C))};
  return {same_after("A last", C, with({"AO"}, C)),
          same_after("AI AO", with({"AI", "AO"}, C), with({"AI", "AO", "BO"}, C))};
}

std::pair<Order, Order> orders_for(const PartyStructure &s) {
  return s.tripartite() ? std::pair{Order::ABC, Order::BAC}
                        : std::pair{Order::AB, Order::BA};
}

LabeledOperator white_noise(const PartyStructure &s) {
  const Index n = s.space.dim();
  const double t = double(s.d("AO") * s.d("BO")) / double(n);
  return t * LabeledOperator::identity(s.space);
}

namespace {

void require_space(const LabeledOperator &op, const PartyStructure &s) {
  if (!(op.space() == s.space))
    throw LabelError("operator space does not match the party structure");
}

ResidualReport identity_report(const LabeledOperator &op,
                               const std::vector<LinearIdentity> &ids) {
  ResidualReport r;
  for (const auto &id : ids)
    r.items.push_back({id.name, apply_identity(id, op).matrix().norm()});
  return r;
}

} // namespace

ResidualReport validate_process(const LabeledOperator &op,
                                const PartyStructure &s) {
  require_space(op, s);
  ResidualReport r = identity_report(op, validity_identities(s));
  r.items.insert(r.items.begin(),
                 {"hermitian", (op.matrix() - op.matrix().adjoint()).norm()});
  r.items.insert(r.items.begin() + 1,
                 {"trace", std::abs(op.trace() - double(s.d("AO") * s.d("BO")))});
  r.min_eigenvalue = min_eigenvalue(op.matrix());
  r.passed = r.worst() <= kResidualTol && r.min_eigenvalue >= -kPsdTol;
  return r;
}

ResidualReport is_causally_ordered(const ProcessMatrix &w, Order o) {
  require_space(w.op, w.structure);
  ResidualReport r = identity_report(w.op, order_identities(w.structure, o));
  r.min_eigenvalue = min_eigenvalue(w.op.matrix());
  r.passed = r.worst() <= kResidualTol;
  return r;
}

SepCone add_sep_cone(Program &p, const PartyStructure &s) {
  const Index n = s.space.dim();
  SepCone c{p.add_psd(n, "W1"), p.add_psd(n, "W2")};
  auto [o1, o2] = orders_for(s);
  const MatrixC zero = MatrixC::Zero(n, n);
  for (auto [v, o] : {std::pair{c.first, o1}, std::pair{c.second, o2}})
    for (const auto &id : order_identities(s, o))
      p.add_equality(apply_identity(id, p(v), s.space), zero);
  return c;
}

double witness_shift(const conic::SolveReport &r, const Program &p,
                     const SepCone &cone, const PartyStructure &s,
                     const LabeledOperator &S) {
  // For V in an ordered cone, Tr(S V) = Tr(Z V) + Tr(P(S - Z) V) with Z the
  // conic dual of that component and P the projector onto its subspace.
  auto [o1, o2] = orders_for(s);
  double delta = 0;
  for (auto [v, o] : {std::pair{cone.first, o1}, std::pair{cone.second, o2}}) {
    LabeledOperator Z(s.space, hermitian_part(r.conic_dual_matrix(p, v)));
    LabeledOperator E = project_kernel(order_identities(s, o), S - Z);
    delta = std::max(delta, -std::min(0.0, min_eigenvalue(Z.matrix())) -
                                std::min(0.0, min_eigenvalue(E.matrix())));
  }
  return delta;
}

ResidualReport verify_decomposition(const ProcessMatrix &w,
                                    const CausalDecomposition &d,
                                    bool check_psd) {
  const PartyStructure &s = w.structure;
  require_space(w.op, s);
  ResidualReport r;
  r.items.push_back({"sum", (d.first + d.second - w.op).matrix().cwiseAbs().maxCoeff()});
  auto [o1, o2] = orders_for(s);
  for (const auto &id : order_identities(s, o1))
    r.items.push_back({std::string("first ") + id.name,
                       apply_identity(id, d.first).matrix().norm()});
  for (const auto &id : order_identities(s, o2))
    r.items.push_back({std::string("second ") + id.name,
                       apply_identity(id, d.second).matrix().norm()});
  const double tr = w.op.trace().real();
  r.items.push_back({"q", tr > 0 ? std::abs(d.first.trace().real() / tr - d.q) : 0.0});
  if (check_psd)
    r.min_eigenvalue = std::min(min_eigenvalue(d.first.matrix()),
                                min_eigenvalue(d.second.matrix()));
  r.passed = r.worst() <= 1e-7 && r.min_eigenvalue >= -kPsdTol;
  return r;
}

SeparabilityResult check_causal_separability(const ProcessMatrix &w,
                                             const conic::SolverOptions &opt) {
  const PartyStructure &s = w.structure;
  require_space(w.op, s);
  Program p;
  const SepCone c = add_sep_cone(p, s);
  const std::size_t sum = p.add_equality(p(c.first) + p(c.second), w.op.matrix());
  auto r = conic::solve(p, opt);
  if (r.status == Status::optimal) {
    CausalDecomposition d{0, {s.space, r.matrix(p, c.first)},
                          {s.space, r.matrix(p, c.second)}, r.slack};
    d.q = d.first.trace().real() / w.op.trace().real();
    return d;
  }
  if (r.status != Status::infeasible)
    throw SolverFailure("separability program did not converge");
  LabeledOperator S(s.space, hermitian_part(r.multiplier(p, sum)));
  const double delta = witness_shift(r, p, c, s, S);
  S = S + delta * LabeledOperator::identity(s.space);
  CausalWitness wit{S, 1.0, 0.0};
  const double t = (S.matrix() * white_noise(s).matrix()).trace().real();
  if (t > 1e-12) {
    wit.normalization = 1.0 / t;
    wit.S = wit.normalization * S;
  }
  wit.value = (wit.S.matrix() * w.op.matrix()).trace().real();
  if (wit.value >= 0)
    throw SolverFailure("extracted witness does not separate the process");
  return wit;
}

double witness_minimum_over_sep(const CausalWitness &wit,
                                const PartyStructure &s,
                                const conic::SolverOptions &opt) {
  Program p;
  const SepCone c = add_sep_cone(p, s);
  p.add_equality(trace(p(c.first) + p(c.second)), double(s.d("AO") * s.d("BO")));
  p.minimize(Expr::inner(wit.S.matrix(), c.first) +
             Expr::inner(wit.S.matrix(), c.second));
  auto r = conic::solve(p, opt);
  if (r.status != Status::optimal)
    throw SolverFailure("witness check did not converge");
  return r.objective_value;
}

double gyni_bound(Index d) {
  if (d < 1)
    throw std::invalid_argument("dimension must be positive");
  return 1.0 - 1.0 / double(d + 1);
}

double lemma_positivity_margin(const LabeledOperator &a) {
  if (a.space().size() != 2)
    throw LabelError("lemma check needs an operator on two factors");
  if (min_eigenvalue(a.matrix()) < -kPsdTol)
    throw std::invalid_argument("operator is not positive semidefinite");
  const auto &f1 = a.space()[0];
  const auto &f2 = a.space()[1];
  const double d = double(std::min(f1.dim, f2.dim));
  LabeledOperator t = tensor(partial_trace(a, {f2.name}),
                             LabeledOperator::identity(TensorSpace{f2}));
  return min_eigenvalue((d * t - a).matrix());
}

CriterionVerdict transpose_criterion(const ProcessMatrix &w, char party,
                                     const conic::SolverOptions &opt) {
  LabelSet labels;
  if (party == 'A')
    labels = {"AI", "AO"};
  else if (party == 'B')
    labels = {"BI", "BO"};
  else
    throw std::invalid_argument("party must be A or B");
  ProcessMatrix t{partial_transpose(w.op, labels), w.structure};
  if (!validate_process(t.op, t.structure).passed)
    return CriterionVerdict::silent;
  auto r = check_causal_separability(t, opt);
  return std::holds_alternative<CausalDecomposition>(r) ? CriterionVerdict::applies
                                                        : CriterionVerdict::silent;
}

namespace {

MatrixC wishart(Index n, std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  MatrixC x(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      x(i, j) = cplx(g(rng), g(rng));
  return x * x.adjoint();
}

// Project a PSD sample onto the subspace, fix the trace and mix in the
// least amount of white noise that restores positivity.
LabeledOperator sample_in(const PartyStructure &s,
                          const std::vector<LinearIdentity> &ids,
                          std::mt19937_64 &rng) {
  const double tr = double(s.d("AO") * s.d("BO"));
  LabeledOperator x = project_kernel(ids, {s.space, wishart(s.space.dim(), rng)});
  x = (tr / x.trace().real()) * x;
  x.matrix() = hermitian_part(x.matrix());
  const LabeledOperator noise = white_noise(s);
  auto mix = [&](double t) { return (1 - t) * x + t * noise; };
  if (min_eigenvalue(x.matrix()) >= 0)
    return x;
  double lo = 0, hi = 1;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    (min_eigenvalue(mix(mid).matrix()) >= 0 ? hi : lo) = mid;
  }
  return mix(hi);
}

} // namespace

LabeledOperator random_ordered_process(const PartyStructure &s, Order o,
                                       std::mt19937_64 &rng) {
  return sample_in(s, order_identities(s, o), rng);
}

ProcessMatrix random_process_matrix(const PartyStructure &s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {sample_in(s, validity_identities(s), rng), s};
}

ProcessMatrix random_separable_process(const PartyStructure &s,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto [o1, o2] = orders_for(s);
  LabeledOperator a = sample_in(s, order_identities(s, o1), rng);
  LabeledOperator b = sample_in(s, order_identities(s, o2), rng);
  const double q = std::uniform_real_distribution<double>(0, 1)(rng);
  return {q * a + (1 - q) * b, s};
}

} // namespace causalis
