#pragma once

#include "causalis/assemblages.hpp"

#include <cstdint>

namespace causalis {

struct SwitchParams {
  Eigen::VectorXcd psi = Eigen::VectorXcd::Unit(2, 0);
  cplx alpha = 1.0 / std::sqrt(2.0);
  cplx beta = 1.0 / std::sqrt(2.0);
};

// |w> = alpha |psi>^AI |Phi+>^{AO BI} |Phi+>^{BO CIt} |0>^CIc
//     + beta  |psi>^BI |Phi+>^{BO AI} |Phi+>^{AO CIt} |1>^CIc
ProcessMatrix pure_switch(const SwitchParams &params);
// Tr_CIt of the balanced switch with target |0>, on (AI, AO, BI, BO, CIc).
ProcessMatrix reduced_switch();
// eta 1/d_I + (1 - eta) W_red with d_I = d_AI d_BI d_CIc.
ProcessMatrix noisy_reduced_switch(double eta);

enum class SwitchScenario { TTT, TTU, TUU, UTT, UUT, UUU };
const char *to_string(SwitchScenario s);
SwitchScenario switch_scenario_from_string(std::string_view name);
inline constexpr SwitchScenario kSwitchScenarios[] = {
    SwitchScenario::TTT, SwitchScenario::TTU, SwitchScenario::TUU,
    SwitchScenario::UTT, SwitchScenario::UUT, SwitchScenario::UUU};

enum class BoundKind { exact, lower_bound };
const char *to_string(BoundKind k);

struct RobustnessResult {
  SwitchScenario scenario = SwitchScenario::TTT;
  double eta_star = 0;
  BoundKind bound_kind = BoundKind::exact;
  bool outer_approximation = false;
  // checks of the optimal point: causal decomposition of the eta* object
  ResidualReport residuals;
  std::optional<CausalDecomposition> process_decomposition;
  std::optional<AssemblageDecomposition> assemblage_decomposition;
  std::optional<CausalBehaviourDecomposition> behaviour_decomposition;
};

// Smallest eta at which the noisy switch is causal in the scenario, with
// the untrusted parties using switch_instruments().
RobustnessResult robustness(SwitchScenario s,
                            const conic::SolverOptions &opt = conic::SolverOptions::from_environment());
std::vector<RobustnessResult> table2(
    const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

// Scenario objects of the noisy switch built from switch_instruments().
Assemblage switch_assemblage(Scenario s, double eta = 0);
Behaviour switch_behaviour(double eta = 0);
// Trusted devices of a scenario, taken from switch_instruments().
Devices switch_trusted(Scenario s);

struct UUTTrial {
  std::string instruments; // "conjugated" or "coarse-grained"
  bool causal = false;
  double slack = 0;
  double residual = 0;
};

struct UUTVerification {
  std::vector<UUTTrial> trials;
  bool all_causal = true;
  double worst_slack = 0;
  double worst_residual = 0;
};

UUTVerification verify_uut_causality(int trials, std::uint64_t seed,
                                     const conic::SolverOptions &opt = conic::SolverOptions::from_environment());

} // namespace causalis
