#pragma once

#include "causalis/conic.hpp"
#include "causalis/report.hpp"
#include "causalis/tensor.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <variant>

namespace causalis {

// Ordered factors with fixed roles. Charlie (if present) has inputs only.
struct PartyStructure {
  TensorSpace space;
  LabelSet charlie;

  bool tripartite() const { return !charlie.empty(); }
  Index d(const std::string &label) const { return space.dim_of(label); }
  Index d_charlie() const { return space.dim_of(charlie); }

  static PartyStructure bipartite(Index ai, Index ao, Index bi, Index bo);
  static PartyStructure tripartite(Index ai, Index ao, Index bi, Index bo,
                                   Index ci);
  // AI AO BI BO plus any factor whose name starts with 'C'
  static PartyStructure infer(const TensorSpace &space);

  friend bool operator==(const PartyStructure &, const PartyStructure &) = default;
};

struct ProcessMatrix {
  LabeledOperator op;
  PartyStructure structure;
};

// Q(W) = _{base} prod_i (1 - _{factors_i}) W. The identity holds iff Q(W) = 0.
// Trace-and-replace maps commute, so Q is an orthogonal projector.
struct LinearIdentity {
  std::string name;
  LabelSet base;
  std::vector<LabelSet> factors;
};

LinearIdentity same_after(std::string name, const LabelSet &small,
                          const LabelSet &large); // _{small}W = _{large}W

template <typename Scalar>
BasicLabeledOperator<Scalar> apply_identity(const LinearIdentity &id,
                                   const BasicLabeledOperator<Scalar> &w) {
  BasicLabeledOperator<Scalar> x = trace_and_replace(w, id.base);
  for (const auto &f : id.factors)
    x = x - trace_and_replace(x, f);
  return x;
}

// Projector onto the joint kernel of the identities.
LabeledOperator project_kernel(const std::vector<LinearIdentity> &ids,
                               const LabeledOperator &w);

// Hermitian-coordinate matrix of Q for the given space (cached).
const conic::SparseMatrix &identity_map(const LinearIdentity &id,
                                        const TensorSpace &space);
conic::Expr apply_identity(const LinearIdentity &id, const conic::Expr &e,
                  const TensorSpace &space);

enum class Order { AB, BA, ABC, BAC };
const char *to_string(Order o);

std::vector<LinearIdentity> validity_identities(const PartyStructure &s);
std::vector<LinearIdentity> order_identities(const PartyStructure &s, Order o);
std::pair<Order, Order> orders_for(const PartyStructure &s);

ResidualReport validate_process(const LabeledOperator &op,
                                const PartyStructure &s);
ResidualReport is_causally_ordered(const ProcessMatrix &w, Order o);

// White-noise process: identity scaled to trace d_AO d_BO.
LabeledOperator white_noise(const PartyStructure &s);

struct CausalDecomposition {
  double q = 0;
  LabeledOperator first;  // q-weighted component, A before B
  LabeledOperator second; // (1-q)-weighted component, B before A
  double slack = 0;
};

struct CausalWitness {
  LabeledOperator S;
  double normalization = 1; // factor applied so Tr(S * white noise) = 1
  double value = 0;         // Tr(S W) for the certified matrix
};

using SeparabilityResult = std::variant<CausalDecomposition, CausalWitness>;

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// W1 in the first ordered cone, W2 in the second.
struct SepCone {
  conic::Var first, second;
};
SepCone add_sep_cone(conic::Program &p, const PartyStructure &s);

// Identity shift delta making Tr((S + delta) V) >= 0 exact on both ordered
// cones, given the conic duals of an infeasible SEP program.
double witness_shift(const conic::SolveReport &r, const conic::Program &p,
                     const SepCone &cone, const PartyStructure &s,
                     const LabeledOperator &S);

// Re-check a decomposition without solving: sum, order identities, PSD.
ResidualReport verify_decomposition(const ProcessMatrix &w,
                                    const CausalDecomposition &d,
                                    bool check_psd = true);

SeparabilityResult check_causal_separability(
    const ProcessMatrix &w,
    const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

// Tr(S V) >= -tol for V separable, checked by minimizing over the SEP cone
// with trace normalization.
double witness_minimum_over_sep(
    const CausalWitness &s, const PartyStructure &structure,
    const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

double gyni_bound(Index d);

double lemma_positivity_margin(const LabeledOperator &a);

enum class CriterionVerdict { applies, silent };
CriterionVerdict transpose_criterion(
    const ProcessMatrix &w, char party,
    const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

ProcessMatrix random_process_matrix(const PartyStructure &s, std::uint64_t seed);
// Random process satisfying the identities of one order.
LabeledOperator random_ordered_process(const PartyStructure &s, Order o,
                                       std::mt19937_64 &rng);
// Separable sample: mixture of random ordered processes.
ProcessMatrix random_separable_process(const PartyStructure &s,
                                       std::uint64_t seed);

} // namespace causalis
