#pragma once

#include "causalis/switch.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace causalis::cli {

using nlohmann::json;

// Malformed input; the message starts with the JSON path of the problem.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json to_json(const SpaceLabel &l);
json to_json(const TensorSpace &s);
json to_json(const LabeledOperator &op);
json to_json(const InstrumentSet &set);
json to_json(const POVMSet &set);
json to_json(const Behaviour &b);
json to_json(const Assemblage &w);
json to_json(const ResidualReport &r);
json to_json(const CausalDecomposition &d);
json to_json(const CausalWitness &w);
json to_json(const CausalBehaviourDecomposition &d);
json to_json(const AssemblageDecomposition &d);
json to_json(const Devices &d);

// path is the location of j inside its document, e.g. "$.elements[0][1]"
SpaceLabel label_from_json(const json &j, const std::string &path);
LabeledOperator operator_from_json(const json &j, const std::string &path = "$");
InstrumentSet instruments_from_json(const json &j, const std::string &path = "$");
POVMSet povm_from_json(const json &j, const std::string &path = "$");
Behaviour behaviour_from_json(const json &j, const std::string &path = "$");
Assemblage assemblage_from_json(const json &j, const std::string &path = "$");
CausalDecomposition decomposition_from_json(const json &j, const std::string &path = "$");
CausalWitness witness_from_json(const json &j, const std::string &path = "$");
CausalBehaviourDecomposition behaviour_decomposition_from_json(const json &j,
                                                               const std::string &path = "$");
AssemblageDecomposition assemblage_decomposition_from_json(const json &j,
                                                           const std::string &path = "$");
Devices devices_from_json(const json &j, const std::string &path = "$");

// An instrument file holds either an instrument set or, with a "space"
// key, a POVM.
bool is_povm_json(const json &j);

json read_json_file(const std::string &file);
std::string fnv1a64(const std::string &bytes);

} // namespace causalis::cli
