#pragma once

#include "causalis/instruments.hpp"
#include "causalis/process.hpp"

#include <optional>

namespace causalis {

// p indexed [x][y][(z)][a][b][(c)], flattened row-major.
struct Behaviour {
  std::vector<Index> settings, outcomes;
  std::vector<double> p;

  Behaviour() = default;
  Behaviour(std::vector<Index> settings, std::vector<Index> outcomes);

  std::size_t parties() const { return settings.size(); }
  bool tripartite() const { return parties() == 3; }
  Index setting_count() const;
  Index outcome_count() const;
  std::size_t flat(const std::vector<Index> &in, const std::vector<Index> &out) const;
  double operator()(const std::vector<Index> &in, const std::vector<Index> &out) const {
    return p[flat(in, out)];
  }
  double &operator()(const std::vector<Index> &in, const std::vector<Index> &out) {
    return p[flat(in, out)];
  }
  std::vector<Index> setting_tuple(Index s) const;
  std::vector<Index> outcome_tuple(Index o) const;
};

ResidualReport validate_behaviour(const Behaviour &b);
// Rescale per-setting sums already within 1e-9 of one; reject otherwise.
Behaviour normalized(const Behaviour &b);
double max_abs_difference(const Behaviour &a, const Behaviour &b);

Behaviour uniform_behaviour(std::vector<Index> settings, std::vector<Index> outcomes);
// p(ab|xy) = delta_{a,y} delta_{b,x}
Behaviour two_way_signalling();

Behaviour born(const LabeledOperator &w, const InstrumentSet &a,
               const InstrumentSet &b);
Behaviour born(const LabeledOperator &w, const InstrumentSet &a,
               const InstrumentSet &b, const POVMSet &c);

// Space matching the instruments' labels: (A_in, A_out, B_in, B_out[, C]).
PartyStructure structure_of(const InstrumentSet &a, const InstrumentSet &b,
                            const POVMSet *c = nullptr);

struct DeterministicCausalStrategy {
  Order order = Order::AB;
  // outcome tables: first party by own setting, second party by
  // (first setting, own setting), Charlie by (x, y, z)
  std::vector<Index> first, second, charlie;

  Behaviour behaviour(const std::vector<Index> &settings,
                      const std::vector<Index> &outcomes) const;
};

struct ExplosionGuard : std::length_error {
  double count;
  ExplosionGuard(double c);
};

inline constexpr double kStrategyLimit = 1e6;

double deterministic_strategy_count(const std::vector<Index> &settings,
                                    const std::vector<Index> &outcomes);
std::vector<DeterministicCausalStrategy>
enumerate_deterministic_causal(const std::vector<Index> &settings,
                               const std::vector<Index> &outcomes);

struct CausalBehaviourDecomposition {
  double q = 1;
  Behaviour first;  // ordered A before B (before C)
  Behaviour second; // ordered B before A (before C)
};

struct CausalBehaviourResult {
  bool causal = false;
  std::vector<DeterministicCausalStrategy> strategies;
  std::vector<double> weights;
  std::optional<CausalBehaviourDecomposition> decomposition;
  // Infeasible: coefficients with sum coef * p >= 0 on every causal
  // behaviour and sum coef * p = -violation on the input.
  std::optional<Behaviour> inequality;
  double violation = 0;
};

Behaviour mix(const CausalBehaviourDecomposition &d);

// Random conditionals chained in the given order.
Behaviour random_ordered_behaviour(const std::vector<Index> &settings,
                                   const std::vector<Index> &outcomes, Order o,
                                   std::mt19937_64 &rng);
CausalBehaviourDecomposition random_causal_decomposition(
    const std::vector<Index> &settings, const std::vector<Index> &outcomes,
    std::uint64_t seed);

CausalBehaviourResult is_causal_behaviour(
    const Behaviour &p,
    const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

double inequality_value(const Behaviour &coefficients, const Behaviour &p);

double gyni_success(const Behaviour &p);

// Largest dependence of the first party's marginal on the other settings.
double order_residual(const Behaviour &p, Order o);

struct BehaviourRealization {
  LabeledOperator W;
  InstrumentSet A, B;
  std::optional<POVMSet> C;
  CausalDecomposition decomposition; // weighted ordered components of W
  PartyStructure structure;
};

// Bipartite or tripartite, following the decomposition's arity.
BehaviourRealization realize_causal_behaviour(const CausalBehaviourDecomposition &d);

enum class Verdict { certified_noncausal, not_certified, inconsistent_behaviour };
const char *to_string(Verdict v);

struct DDResult {
  Verdict verdict = Verdict::not_certified;
  std::optional<LabeledOperator> W_sep;
  std::optional<CausalDecomposition> decomposition;
  // certified: functional s with sum s*p < 0 and >= 0 on separable processes;
  // witness operator S = sum s(e) A (x) B (x) M.
  std::optional<Behaviour> functional;
  std::optional<LabeledOperator> witness;
  double value = 0;
};

DDResult certify_dd(const Behaviour &p, const InstrumentSet &a,
                    const InstrumentSet &b, const POVMSet *c = nullptr,
                    const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

struct DIResult {
  Verdict verdict = Verdict::not_certified;
  std::optional<Behaviour> inequality;
  double violation = 0;
  std::optional<BehaviourRealization> realization;
};

DIResult certify_di(const Behaviour &p,
                    const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

// max Tr(W M) with M = 1/4 sum delta_{a,y} delta_{b,x} A_{a|x} (x) B_{b|y}
// over valid (or separable) bipartite processes on the instruments' spaces.
double max_gyni_over_processes(const InstrumentSet &a, const InstrumentSet &b,
                               bool separable_only = false,
                               const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

// Least-squares inversion of the Born map for spanning instruments.
LabeledOperator reconstruct_process(const Behaviour &p, const InstrumentSet &a,
                                    const InstrumentSet &b);
// Smallest singular value of the Born map restricted to the valid subspace.
double born_map_min_singular_value(const InstrumentSet &a, const InstrumentSet &b);

} // namespace causalis
