#pragma once

#include "causalis/report.hpp"
#include "causalis/tensor.hpp"

#include <random>

namespace causalis {

// Choi operators on (input, output), indexed [setting][outcome].
struct InstrumentSet {
  SpaceLabel input, output;
  std::vector<std::vector<LabeledOperator>> elements;

  InstrumentSet() = default;
  InstrumentSet(SpaceLabel in, SpaceLabel out,
                const std::vector<std::vector<MatrixC>> &mats);

  Index settings() const { return static_cast<Index>(elements.size()); }
  Index outcomes() const {
    return elements.empty() ? 0 : static_cast<Index>(elements[0].size());
  }
  const LabeledOperator &operator()(Index x, Index a) const {
    return elements.at(x).at(a);
  }
  TensorSpace space() const { return TensorSpace{input, output}; }
  InstrumentSet relabeled(const std::string &in, const std::string &out) const;
};

// Effects on one factor, indexed [setting][outcome].
struct POVMSet {
  SpaceLabel space;
  std::vector<std::vector<LabeledOperator>> elements;

  POVMSet() = default;
  POVMSet(SpaceLabel s, const std::vector<std::vector<MatrixC>> &mats);

  Index settings() const { return static_cast<Index>(elements.size()); }
  Index outcomes() const {
    return elements.empty() ? 0 : static_cast<Index>(elements[0].size());
  }
  const LabeledOperator &operator()(Index z, Index c) const {
    return elements.at(z).at(c);
  }
  POVMSet relabeled(const std::string &name) const;
};

ResidualReport validate_instruments(const InstrumentSet &set);
ResidualReport validate_instruments(const POVMSet &set);

struct SwitchInstruments {
  InstrumentSet alice; // AI AO
  InstrumentSet bob;   // BI BO
  POVMSet charlie;     // CIc
};

// |00><00|, |11><11| for x=0 and |++><++|, |--><--| for x=1; Charlie
// measures in the |+>, |-> basis.
SwitchInstruments switch_instruments();

InstrumentSet unitary_instrument(const MatrixC &u, const std::string &in = "AI",
                                 const std::string &out = "AO");

// Measure-and-prepare family: settings are d_out^2 preparations, outcomes a
// d_in^2-element informationally complete POVM.
InstrumentSet tomographic_instruments(Index d_in, Index d_out,
                                      const std::string &in = "AI",
                                      const std::string &out = "AO");

// Gram rank of all elements seen as vectors in the Hermitian operator space.
Index spanning_rank(const InstrumentSet &set);

MatrixC random_unitary(Index d, std::mt19937_64 &rng);
InstrumentSet random_instrument(Index d_in, Index d_out, Index settings,
                                Index outcomes, std::mt19937_64 &rng,
                                const std::string &in = "AI",
                                const std::string &out = "AO");
POVMSet random_povm(Index d, Index settings, Index outcomes,
                    std::mt19937_64 &rng, const std::string &name = "CI");

// Merge outcomes: outcome a goes to groups[a].
InstrumentSet coarse_grain(const InstrumentSet &set,
                           const std::vector<Index> &groups);

} // namespace causalis
