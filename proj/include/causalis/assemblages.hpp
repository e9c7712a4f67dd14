#pragma once

#include "causalis/behaviours.hpp"

#include <string_view>

namespace causalis {

// Which parties are trusted. SDI is the bipartite case with Bob trusted.
enum class Scenario { SDI, TTU, TUU, UTT, UUT };
const char *to_string(Scenario s);
Scenario scenario_from_string(std::string_view name);

// Devices of some subset of the parties.
struct Devices {
  std::optional<InstrumentSet> alice, bob;
  std::optional<POVMSet> charlie;
};

// Elements on the trusted factors, indexed like a behaviour over the
// untrusted parties: [settings...][outcomes...] row-major, parties in the
// order A, B, C.
//   SDI  w_{a|x}    on (BI, BO)
//   TTU  w_{c|z}    on (AI, AO, BI, BO)
//   TUU  w_{bc|yz}  on (AI, AO)
//   UTT  w_{a|x}    on (BI, BO, C...)
//   UUT  w_{ab|xy}  on (C...)
struct Assemblage {
  Scenario scenario = Scenario::SDI;
  TensorSpace trusted;
  std::vector<Index> settings, outcomes;
  std::vector<LabeledOperator> elements;

  Index setting_count() const;
  Index outcome_count() const;
  std::size_t flat(const std::vector<Index> &in, const std::vector<Index> &out) const;
  const LabeledOperator &operator()(const std::vector<Index> &in,
                                    const std::vector<Index> &out) const {
    return elements.at(flat(in, out));
  }
  std::vector<Index> setting_tuple(Index s) const;
  std::vector<Index> outcome_tuple(Index o) const;
  // Tr of the outcome sum for each setting
  double normalization() const;
};

Assemblage assemblage_from_process(const LabeledOperator &W,
                                   const Devices &untrusted, Scenario s);

ResidualReport validate_assemblage(const Assemblage &w);

// Unnormalized ordered components; q is the weight of the first.
struct AssemblageDecomposition {
  double q = 0;
  std::vector<LabeledOperator> first, second;
};

// sum_e Tr(F_e w_e) >= 0 on causal assemblages, = value < 0 on the input.
struct AssemblageWitness {
  std::vector<LabeledOperator> F;
  double value = 0;
};

struct CausalAssemblageResult {
  bool causal = false;
  // TUU, UTT, UUT: the sets used may be larger than the realizable ones
  bool outer_approximation = false;
  std::optional<AssemblageDecomposition> decomposition;
  std::optional<AssemblageWitness> witness;
  double slack = 0;
};

// Per element and order, one PSD variable on the trusted space, with the
// order's linear conditions imposed.
struct AssemblageCone {
  std::vector<conic::Var> first, second;
};
AssemblageCone add_causal_assemblage_cone(conic::Program &p, const Assemblage &shape);

CausalAssemblageResult is_causal_assemblage(
    const Assemblage &w,
    const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

ResidualReport verify_assemblage_decomposition(const Assemblage &w,
                                               const AssemblageDecomposition &d);
double witness_value(const AssemblageWitness &f, const Assemblage &w);

struct SDIResult {
  Verdict verdict = Verdict::not_certified;
  std::optional<Assemblage> assemblage;
  std::optional<AssemblageDecomposition> decomposition;
  // certified: sum f*p >= 0 for every behaviour from a causal assemblage
  // and these trusted devices, < 0 on the data
  std::optional<Behaviour> functional;
  double value = 0;
  bool outer_approximation = false;
};

SDIResult certify_sdi(const Behaviour &p, const Devices &trusted, Scenario s,
                      const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

// Behaviour produced by trusted devices on an assemblage.
Behaviour behaviour_of(const Assemblage &w, const Devices &trusted);

struct AssemblageRealization {
  LabeledOperator W;
  PartyStructure structure;
  Devices untrusted;
  CausalDecomposition decomposition;
};

// SDI, TTU and UUT only.
AssemblageRealization realize_causal_assemblage(const Assemblage &w,
                                                const AssemblageDecomposition &d);
AssemblageRealization realize_causal_assemblage(
    const Assemblage &w,
    const conic::SolverOptions &opt = conic::SolverOptions::from_environment());
// Any valid TTU assemblage, by purifying the sum.
AssemblageRealization realize_ttu_assemblage(const Assemblage &w);

// Assemblage of a random separable process (qubits, Charlie factor "CI")
// under random untrusted devices, with the decomposition it inherits.
// Untrusted settings and outcomes are drawn from 2..max_range.
struct CausalAssemblageSample {
  Assemblage assemblage;
  AssemblageDecomposition decomposition;
};
CausalAssemblageSample random_causal_assemblage(Scenario s, std::uint64_t seed,
                                                Index max_range = 2);

// w_{a|x} = |x><x| (x) |a><a| on qubits BI, BO.
Assemblage nonprocess_assemblage_example();

} // namespace causalis
