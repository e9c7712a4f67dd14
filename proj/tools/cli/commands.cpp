#include "cli/commands.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace causalis::cli {

namespace {

// Tolerances used when re-checking certificates.
constexpr double kDecompositionTol = 1e-7;
constexpr double kPsdCheckTol = 1e-8;
constexpr double kMatchTol = 1e-7;

struct Context {
  const RunConfig &cfg;
  json &report;
  conic::SolverOptions opt;

  std::vector<json> load(const std::string &key, std::size_t min, std::size_t max) {
    auto it = cfg.inputs.find(key);
    const std::size_t n = it == cfg.inputs.end() ? 0 : it->second.size();
    if (n < min || n > max)
      throw InputError("--" + key + ": expected " +
                       (min == max ? std::to_string(min)
                                   : std::to_string(min) + " to " + std::to_string(max)) +
                       " file(s), got " + std::to_string(n));
    std::vector<json> out;
    json &slot = report["inputs"][key];
    slot = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      const std::string &path = it->second[i];
      std::ifstream in(path, std::ios::binary);
      if (!in)
        throw InputError(path + ": cannot open");
      std::stringstream ss;
      ss << in.rdbuf();
      json data;
      try {
        data = json::parse(ss.str());
      } catch (const json::parse_error &e) {
        throw InputError(path + ": " + e.what());
      }
      slot.push_back({{"path", path}, {"fnv1a64", fnv1a64(ss.str())}, {"data", data}});
      out.push_back(std::move(data));
    }
    return out;
  }

  json load_one(const std::string &key) { return load(key, 1, 1)[0]; }

  bool has(const std::string &key) const {
    auto it = cfg.inputs.find(key);
    return it != cfg.inputs.end() && !it->second.empty();
  }
};

// Inputs as stored in a report.
std::vector<json> stored(const json &report, const std::string &key) {
  std::vector<json> out;
  if (!report.contains("inputs") || !report["inputs"].contains(key))
    return out;
  for (const auto &i : report["inputs"][key])
    out.push_back(i.at("data"));
  return out;
}

json stored_one(const json &report, const std::string &key) {
  auto v = stored(report, key);
  if (v.size() != 1)
    throw InputError("report lacks the " + key + " input");
  return v[0];
}

// Instrument files go to the party named by their input label; POVMs to Charlie.
Devices devices_from(const std::vector<json> &files) {
  Devices d;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string path = "$instruments[" + std::to_string(i) + "]";
    if (is_povm_json(files[i])) {
      if (d.charlie)
        throw InputError(path + ": second POVM");
      d.charlie = povm_from_json(files[i], path);
      continue;
    }
    InstrumentSet s = instruments_from_json(files[i], path);
    const char party = s.input.name.empty() ? '?' : s.input.name[0];
    auto &slot = party == 'A' ? d.alice : party == 'B' ? d.bob : d.alice;
    if (party != 'A' && party != 'B')
      throw InputError(path + ".input: label must start with A or B");
    if (slot)
      throw InputError(path + ": second instrument set for the same party");
    slot = std::move(s);
  }
  return d;
}

struct Parties {
  InstrumentSet a, b;
  std::optional<POVMSet> c;
};

Parties parties_from(const Devices &d) {
  if (!d.alice || !d.bob)
    throw InputError("$instruments: instruments for Alice and Bob are required");
  return {*d.alice, *d.bob, d.charlie};
}

Behaviour born_of(const LabeledOperator &w, const Parties &p) {
  return p.c ? born(w, p.a, p.b, *p.c) : born(w, p.a, p.b);
}

Scenario scenario_of(const RunConfig &cfg) {
  if (!cfg.scenario)
    throw InputError("--scenario is required");
  try {
    return scenario_from_string(*cfg.scenario);
  } catch (const std::exception &) {
    throw InputError("--scenario: unknown scenario " + *cfg.scenario);
  }
}

std::uint64_t seed_of(const RunConfig &cfg) {
  if (!cfg.seed)
    throw InputError("--seed is required for randomized commands");
  return *cfg.seed;
}

double max_abs(const MatrixC &m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double assemblage_difference(const Assemblage &a, const Assemblage &b) {
  if (a.elements.size() != b.elements.size() || a.settings != b.settings ||
      a.outcomes != b.outcomes || !(a.trusted == b.trusted))
    return std::numeric_limits<double>::infinity();
  double d = 0;
  for (std::size_t i = 0; i < a.elements.size(); ++i)
    d = std::max(d, max_abs(a.elements[i].matrix() - b.elements[i].matrix()));
  return d;
}

bool decomposition_ok(const ProcessMatrix &w, const CausalDecomposition &d) {
  const ResidualReport r = verify_decomposition(w, d, true);
  return r.worst() <= kDecompositionTol && r.min_eigenvalue >= -kPsdCheckTol;
}

bool assemblage_decomposition_ok(const Assemblage &w, const AssemblageDecomposition &d) {
  const ResidualReport r = verify_assemblage_decomposition(w, d);
  return r.worst() <= kDecompositionTol && r.min_eigenvalue >= -kPsdCheckTol;
}

bool witness_ok(const ProcessMatrix &w, const CausalWitness &s) {
  const double v = expectation(w.op, s.S).real();
  const double noise = expectation(white_noise(w.structure), s.S).real();
  return v < 0 && std::abs(v - s.value) <= 1e-9 * std::max(1.0, std::abs(v)) &&
         std::abs(noise - 1) <= 1e-6;
}

bool behaviour_decomposition_ok(const Behaviour &p, const CausalBehaviourDecomposition &d) {
  const bool tri = p.tripartite();
  return max_abs_difference(mix(d), p) <= kDecompositionTol && d.q >= -1e-9 &&
         d.q <= 1 + 1e-9 && validate_behaviour(d.first).passed &&
         validate_behaviour(d.second).passed &&
         order_residual(d.first, tri ? Order::ABC : Order::AB) <= kDecompositionTol &&
         order_residual(d.second, tri ? Order::BAC : Order::BA) <= kDecompositionTol;
}

// Functional nonnegative on every deterministic causal strategy.
bool inequality_ok(const Behaviour &coef, const Behaviour &p, double violation) {
  const double v = inequality_value(coef, p);
  if (!(v < 0) || std::abs(v + violation) > 1e-9 * std::max(1.0, violation))
    return false;
  for (const auto &s : enumerate_deterministic_causal(p.settings, p.outcomes))
    if (inequality_value(coef, s.behaviour(p.settings, p.outcomes)) < -1e-9)
      return false;
  return true;
}

bool realization_ok(const json &r, const Behaviour &p) {
  const LabeledOperator W = operator_from_json(r.at("W"), "$.certificate.realization.W");
  const Devices d = devices_from_json(r.at("instruments"), "$.certificate.realization.instruments");
  const Parties parties = parties_from(d);
  const ProcessMatrix pm{W, PartyStructure::infer(W.space())};
  for (const InstrumentSet *s : {&parties.a, &parties.b})
    if (!validate_instruments(*s).passed)
      return false;
  if (parties.c && !validate_instruments(*parties.c).passed)
    return false;
  const CausalDecomposition dec =
      decomposition_from_json(r.at("decomposition"), "$.certificate.realization.decomposition");
  return validate_process(W, pm.structure).worst() <= kDecompositionTol &&
         decomposition_ok(pm, dec) &&
         max_abs_difference(born_of(W, parties), p) <= kMatchTol;
}

json realization_json(const BehaviourRealization &r) {
  Devices d;
  d.alice = r.A;
  d.bob = r.B;
  d.charlie = r.C;
  return {{"W", to_json(r.W)}, {"instruments", to_json(d)}, {"decomposition", to_json(r.decomposition)}};
}

json lemma_sample_json(Index i, std::mt19937_64 &rng, double &margin) {
  // cycles through 2x2, 2x3, ..., 4x4
  const Index d1 = 2 + i % 3, d2 = 2 + (i / 3) % 3;
  std::normal_distribution<double> g;
  const Index n = d1 * d2;
  MatrixC x(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c)
      x(r, c) = cplx(g(rng), g(rng));
  const LabeledOperator a({SpaceLabel{"X", d1}, SpaceLabel{"Y", d2}}, x * x.adjoint());
  margin = lemma_positivity_margin(a);
  return {{"dims", {d1, d2}}, {"margin", margin}};
}

// --- switch helpers -----------------------------------------------------

Scenario assemblage_scenario(SwitchScenario s) {
  switch (s) {
  case SwitchScenario::TTU:
    return Scenario::TTU;
  case SwitchScenario::TUU:
    return Scenario::TUU;
  case SwitchScenario::UTT:
    return Scenario::UTT;
  default:
    return Scenario::UUT;
  }
}

json robustness_json(const RobustnessResult &r) {
  json j = {{"scenario", to_string(r.scenario)},
            {"eta_star", r.eta_star},
            {"bound_kind", to_string(r.bound_kind)},
            {"outer_approximation", r.outer_approximation},
            {"residuals", to_json(r.residuals)}};
  if (r.process_decomposition)
    j["certificate"] = {{"process_decomposition", to_json(*r.process_decomposition)}};
  if (r.assemblage_decomposition)
    j["certificate"] = {{"assemblage_decomposition", to_json(*r.assemblage_decomposition)}};
  if (r.behaviour_decomposition)
    j["certificate"] = {{"behaviour_decomposition", to_json(*r.behaviour_decomposition)}};
  return j;
}

bool robustness_ok(const json &row) {
  const SwitchScenario s = switch_scenario_from_string(row.at("scenario").get<std::string>());
  const double eta = row.at("eta_star").get<double>();
  const json &cert = row.at("certificate");
  switch (s) {
  case SwitchScenario::TTT:
    return decomposition_ok(noisy_reduced_switch(eta),
                            decomposition_from_json(cert.at("process_decomposition"),
                                                    "$.certificate.process_decomposition"));
  case SwitchScenario::UUU:
    return behaviour_decomposition_ok(
        switch_behaviour(eta),
        behaviour_decomposition_from_json(cert.at("behaviour_decomposition"),
                                          "$.certificate.behaviour_decomposition"));
  default:
    return assemblage_decomposition_ok(
        switch_assemblage(assemblage_scenario(s), eta),
        assemblage_decomposition_from_json(cert.at("assemblage_decomposition"),
                                           "$.certificate.assemblage_decomposition"));
  }
}

// --- commands -------------------------------------------------------------

struct Command {
  std::function<void(Context &)> run;
  std::function<bool(const json &, std::string &)> verify;
};

void validate_process_cmd(Context &c) {
  const LabeledOperator W = operator_from_json(c.load_one("in"));
  const PartyStructure s = PartyStructure::infer(W.space());
  const ResidualReport r = validate_process(W, s);
  c.report["verdict"] = r.passed ? "valid" : "invalid";
  c.report["residuals"] = to_json(r);
}

bool validate_process_verify(const json &rep, std::string &why) {
  const LabeledOperator W = operator_from_json(stored_one(rep, "in"));
  const bool passed = validate_process(W, PartyStructure::infer(W.space())).passed;
  if (passed != (rep.at("verdict") == "valid"))
    why = "validity verdict does not match the input";
  return why.empty();
}

void check_sep_cmd(Context &c) {
  const LabeledOperator W = operator_from_json(c.load_one("in"));
  const ProcessMatrix w{W, PartyStructure::infer(W.space())};
  const ResidualReport v = validate_process(W, w.structure);
  if (!v.passed)
    throw InputError("$: not a valid process matrix (worst residual " +
                     std::to_string(v.worst()) + ")");
  const auto r = check_causal_separability(w, c.opt);
  if (const auto *d = std::get_if<CausalDecomposition>(&r)) {
    c.report["verdict"] = "separable";
    c.report["results"] = {{"q", d->q}};
    c.report["certificate"] = {{"decomposition", to_json(*d)}};
    c.report["residuals"] = to_json(verify_decomposition(w, *d));
  } else {
    const auto &s = std::get<CausalWitness>(r);
    c.report["verdict"] = "nonseparable";
    c.report["results"] = {{"witness_value", s.value}};
    c.report["certificate"] = {{"witness", to_json(s)}};
  }
}

bool check_sep_verify(const json &rep, std::string &why) {
  const LabeledOperator W = operator_from_json(stored_one(rep, "in"));
  const ProcessMatrix w{W, PartyStructure::infer(W.space())};
  const json &cert = rep.at("certificate");
  if (rep.at("verdict") == "separable") {
    if (!decomposition_ok(w, decomposition_from_json(cert.at("decomposition"),
                                                     "$.certificate.decomposition")))
      why = "decomposition does not reproduce the process";
  } else if (!witness_ok(w, witness_from_json(cert.at("witness"), "$.certificate.witness"))) {
    why = "witness does not separate the process";
  }
  return why.empty();
}

void validate_instruments_cmd(Context &c) {
  const json j = c.load_one("in");
  const ResidualReport r =
      is_povm_json(j) ? validate_instruments(povm_from_json(j)) : validate_instruments(instruments_from_json(j));
  c.report["verdict"] = r.passed ? "valid" : "invalid";
  c.report["residuals"] = to_json(r);
}

bool validate_instruments_verify(const json &rep, std::string &why) {
  const json j = stored_one(rep, "in");
  const bool passed = is_povm_json(j) ? validate_instruments(povm_from_json(j)).passed
                                      : validate_instruments(instruments_from_json(j)).passed;
  if (passed != (rep.at("verdict") == "valid"))
    why = "validity verdict does not match the input";
  return why.empty();
}

void born_cmd(Context &c) {
  const LabeledOperator W = operator_from_json(c.load_one("process"));
  const Parties p = parties_from(devices_from(c.load("instruments", 2, 3)));
  c.report["verdict"] = "computed";
  c.report["results"] = {{"behaviour", to_json(born_of(W, p))}};
}

bool born_verify(const json &rep, std::string &why) {
  const LabeledOperator W = operator_from_json(stored_one(rep, "process"));
  const Parties p = parties_from(devices_from(stored(rep, "instruments")));
  const Behaviour b = behaviour_from_json(rep.at("results").at("behaviour"), "$.results.behaviour");
  if (max_abs_difference(born_of(W, p), b) > 1e-12)
    why = "behaviour does not match the Born rule";
  return why.empty();
}

void assemblage_cmd(Context &c) {
  const Scenario s = scenario_of(c.cfg);
  const LabeledOperator W = operator_from_json(c.load_one("process"));
  const Devices d = devices_from(c.load("instruments", 1, 3));
  c.report["verdict"] = "computed";
  c.report["results"] = {{"assemblage", to_json(assemblage_from_process(W, d, s))}};
}

bool assemblage_verify(const json &rep, std::string &why) {
  const Scenario s = scenario_from_string(rep.at("config").at("scenario").get<std::string>());
  const LabeledOperator W = operator_from_json(stored_one(rep, "process"));
  const Devices d = devices_from(stored(rep, "instruments"));
  const Assemblage w = assemblage_from_json(rep.at("results").at("assemblage"), "$.results.assemblage");
  if (assemblage_difference(assemblage_from_process(W, d, s), w) > 1e-12)
    why = "assemblage does not match the process";
  return why.empty();
}

void certify_dd_cmd(Context &c) {
  const Behaviour p = behaviour_from_json(c.load_one("behaviour"));
  const Parties parties = parties_from(devices_from(c.load("instruments", 2, 3)));
  const DDResult r = certify_dd(p, parties.a, parties.b, parties.c ? &*parties.c : nullptr, c.opt);
  c.report["verdict"] = to_string(r.verdict);
  json cert = json::object();
  if (r.functional) {
    cert["functional"] = to_json(*r.functional);
    cert["value"] = r.value;
    c.report["results"] = {{"value", r.value}};
  }
  if (r.witness)
    cert["witness"] = to_json(*r.witness);
  if (r.W_sep)
    cert["W_sep"] = to_json(*r.W_sep);
  if (r.decomposition) {
    cert["decomposition"] = to_json(*r.decomposition);
    c.report["results"] = {{"q", r.decomposition->q}};
  }
  c.report["certificate"] = cert;
}

bool certify_dd_verify(const json &rep, std::string &why) {
  const Behaviour p = normalized(behaviour_from_json(stored_one(rep, "behaviour")));
  const Parties parties = parties_from(devices_from(stored(rep, "instruments")));
  const json &cert = rep.at("certificate");
  if (rep.at("verdict") == "not-certified") {
    const LabeledOperator W = operator_from_json(cert.at("W_sep"), "$.certificate.W_sep");
    const ProcessMatrix w{W, PartyStructure::infer(W.space())};
    if (!decomposition_ok(w, decomposition_from_json(cert.at("decomposition"),
                                                     "$.certificate.decomposition")))
      why = "decomposition does not reproduce W_sep";
    else if (max_abs_difference(born_of(W, parties), p) > kMatchTol)
      why = "W_sep does not reproduce the behaviour";
    return why.empty();
  }
  const Behaviour f = behaviour_from_json(cert.at("functional"), "$.certificate.functional");
  const double v = inequality_value(f, p);
  if (!(v < 0) || std::abs(v - cert.at("value").get<double>()) > 1e-9)
    why = "functional does not separate the behaviour";
  else if (cert.contains("witness")) {
    // sum f born(W) = Tr(S W) for every valid W; checked on white noise
    const LabeledOperator S = operator_from_json(cert.at("witness"), "$.certificate.witness");
    const PartyStructure s = PartyStructure::infer(S.space());
    const LabeledOperator noise = white_noise(s);
    if (std::abs(inequality_value(f, born_of(noise, parties)) - expectation(noise, S).real()) > 1e-7)
      why = "witness and functional disagree";
  }
  return why.empty();
}

void certify_di_cmd(Context &c) {
  const Behaviour p = behaviour_from_json(c.load_one("behaviour"));
  const DIResult r = certify_di(p, c.opt);
  c.report["verdict"] = to_string(r.verdict);
  json cert = json::object();
  if (r.inequality) {
    cert["inequality"] = to_json(*r.inequality);
    cert["violation"] = r.violation;
    c.report["results"] = {{"violation", r.violation}};
  }
  if (r.realization)
    cert["realization"] = realization_json(*r.realization);
  c.report["certificate"] = cert;
}

bool certify_di_verify(const json &rep, std::string &why) {
  const Behaviour p = behaviour_from_json(stored_one(rep, "behaviour"));
  const json &cert = rep.at("certificate");
  if (cert.contains("realization")) {
    if (!realization_ok(cert["realization"], p))
      why = "realization does not reproduce the behaviour";
  } else if (!inequality_ok(behaviour_from_json(cert.at("inequality"), "$.certificate.inequality"),
                            p, cert.at("violation").get<double>())) {
    why = "inequality is not a valid causal inequality violated by the behaviour";
  }
  return why.empty();
}

void certify_sdi_cmd(Context &c) {
  const Scenario s = scenario_of(c.cfg);
  const Behaviour p = behaviour_from_json(c.load_one("behaviour"));
  const Devices trusted = devices_from(c.load("instruments", 0, 3));
  const SDIResult r = certify_sdi(p, trusted, s, c.opt);
  c.report["verdict"] = to_string(r.verdict);
  c.report["results"] = {{"value", r.value}, {"outer_approximation", r.outer_approximation}};
  json cert = json::object();
  if (r.functional) {
    cert["functional"] = to_json(*r.functional);
    cert["value"] = r.value;
  }
  if (r.assemblage)
    cert["assemblage"] = to_json(*r.assemblage);
  if (r.decomposition)
    cert["decomposition"] = to_json(*r.decomposition);
  c.report["certificate"] = cert;
}

bool certify_sdi_verify(const json &rep, std::string &why) {
  const Behaviour p = behaviour_from_json(stored_one(rep, "behaviour"));
  const Devices trusted = devices_from(stored(rep, "instruments"));
  const json &cert = rep.at("certificate");
  if (rep.at("verdict") == "not-certified") {
    const Assemblage w = assemblage_from_json(cert.at("assemblage"), "$.certificate.assemblage");
    if (!assemblage_decomposition_ok(
            w, assemblage_decomposition_from_json(cert.at("decomposition"), "$.certificate.decomposition")))
      why = "decomposition does not reproduce the assemblage";
    else if (max_abs_difference(behaviour_of(w, trusted), normalized(p)) > kMatchTol)
      why = "assemblage does not reproduce the behaviour";
    return why.empty();
  }
  const Behaviour f = behaviour_from_json(cert.at("functional"), "$.certificate.functional");
  const double v = inequality_value(f, normalized(p));
  if (!(v < 0) || std::abs(v - cert.at("value").get<double>()) > 1e-9)
    why = "functional does not separate the behaviour";
  return why.empty();
}

void gyni_cmd(Context &c) {
  c.report["verdict"] = "computed";
  if (c.has("behaviour")) {
    const Behaviour p = behaviour_from_json(c.load_one("behaviour"));
    c.report["results"] = {{"success", gyni_success(p)}, {"causal_bound", 0.5}};
    return;
  }
  const Parties p = parties_from(devices_from(c.load("instruments", 2, 2)));
  const double v = max_gyni_over_processes(p.a, p.b, c.cfg.separable, c.opt);
  const Index d = structure_of(p.a, p.b).space.dim();
  c.report["results"] = {{"max_success", v},
                         {"separable_only", c.cfg.separable},
                         {"dimension", d},
                         {"bound", c.cfg.separable ? 0.5 : gyni_bound(d)}};
}

bool gyni_verify(const json &rep, std::string &why) {
  const json &res = rep.at("results");
  if (res.contains("success")) {
    if (std::abs(gyni_success(behaviour_from_json(stored_one(rep, "behaviour"))) -
                 res["success"].get<double>()) > 1e-12)
      why = "success probability does not match the behaviour";
  } else if (res.at("max_success").get<double>() > res.at("bound").get<double>() + 1e-6) {
    why = "value exceeds the dimension bound";
  }
  return why.empty();
}

void gyni_bound_cmd(Context &c) {
  if (!c.cfg.dim)
    throw InputError("--dim is required");
  if (*c.cfg.dim < 1)
    throw InputError("--dim: must be positive");
  c.report["verdict"] = "computed";
  c.report["results"] = {{"dim", *c.cfg.dim}, {"bound", gyni_bound(static_cast<Index>(*c.cfg.dim))}};
}

bool gyni_bound_verify(const json &rep, std::string &why) {
  const json &res = rep.at("results");
  if (gyni_bound(res.at("dim").get<Index>()) != res.at("bound").get<double>())
    why = "bound does not match";
  return why.empty();
}

constexpr double kLemmaTol = -1e-9;

void lemma_check_cmd(Context &c) {
  json samples = json::array();
  double worst = std::numeric_limits<double>::infinity();
  if (c.has("in")) {
    const LabeledOperator a = operator_from_json(c.load_one("in"));
    worst = lemma_positivity_margin(a);
    samples.push_back({{"dims", {a.space()[0].dim, a.space().size() > 1 ? a.space()[1].dim : 0}},
                       {"margin", worst}});
  } else {
    const std::uint64_t seed = seed_of(c.cfg);
    const long long n = c.cfg.count.value_or(200);
    if (n < 1)
      throw InputError("--count: must be positive");
    std::mt19937_64 rng(seed);
    for (long long i = 0; i < n; ++i) {
      double m = 0;
      samples.push_back(lemma_sample_json(static_cast<Index>(i), rng, m));
      worst = std::min(worst, m);
    }
  }
  c.report["verdict"] = worst >= kLemmaTol ? "holds" : "violated";
  c.report["results"] = {{"worst_margin", worst}, {"samples", samples}};
}

bool lemma_check_verify(const json &rep, std::string &why) {
  const json &res = rep.at("results");
  double worst = std::numeric_limits<double>::infinity();
  const auto in = stored(rep, "in");
  if (!in.empty()) {
    worst = lemma_positivity_margin(operator_from_json(in[0]));
  } else {
    std::mt19937_64 rng(rep.at("config").at("seed").get<std::uint64_t>());
    for (std::size_t i = 0; i < res.at("samples").size(); ++i) {
      double m = 0;
      lemma_sample_json(static_cast<Index>(i), rng, m);
      worst = std::min(worst, m);
    }
  }
  if (std::abs(worst - res.at("worst_margin").get<double>()) > 1e-12)
    why = "margins do not match";
  else if ((worst >= kLemmaTol) != (rep.at("verdict") == "holds"))
    why = "verdict does not match the margin";
  return why.empty();
}

void switch_robustness_cmd(Context &c) {
  if (!c.cfg.scenario)
    throw InputError("--scenario is required");
  SwitchScenario s;
  try {
    s = switch_scenario_from_string(*c.cfg.scenario);
  } catch (const std::exception &) {
    throw InputError("--scenario: unknown switch scenario " + *c.cfg.scenario);
  }
  const RobustnessResult r = robustness(s, c.opt);
  c.report["verdict"] = "computed";
  c.report["results"] = robustness_json(r);
}

bool switch_robustness_verify(const json &rep, std::string &why) {
  if (!robustness_ok(rep.at("results")))
    why = "decomposition at eta* does not reproduce the noisy switch";
  return why.empty();
}

void switch_table2_cmd(Context &c) {
  json rows = json::array();
  for (const auto &r : table2(c.opt))
    rows.push_back(robustness_json(r));
  c.report["verdict"] = "computed";
  c.report["results"] = {{"table", rows}};
}

bool switch_table2_verify(const json &rep, std::string &why) {
  for (const auto &row : rep.at("results").at("table"))
    if (!robustness_ok(row)) {
      why = "row " + row.at("scenario").get<std::string>() + " does not verify";
      return false;
    }
  return true;
}

void switch_verify_uut_cmd(Context &c) {
  const std::uint64_t seed = seed_of(c.cfg);
  const long long n = c.cfg.trials.value_or(50);
  if (n < 1)
    throw InputError("--trials: must be positive");
  const UUTVerification v = verify_uut_causality(static_cast<int>(n), seed, c.opt);
  json trials = json::array();
  for (const auto &t : v.trials)
    trials.push_back({{"instruments", t.instruments},
                      {"causal", t.causal},
                      {"slack", t.slack},
                      {"residual", t.residual}});
  c.report["verdict"] = v.all_causal ? "all-causal" : "noncausal-found";
  c.report["results"] = {{"trials", trials},
                         {"all_causal", v.all_causal},
                         {"worst_slack", v.worst_slack},
                         {"worst_residual", v.worst_residual}};
}

bool switch_verify_uut_verify(const json &rep, std::string &why) {
  const json &res = rep.at("results");
  bool all = true;
  for (const auto &t : res.at("trials")) {
    all = all && t.at("causal").get<bool>();
    if (t.at("causal").get<bool>() && t.at("residual").get<double>() > kDecompositionTol)
      why = "a causal trial has a large decomposition residual";
  }
  if (all != res.at("all_causal").get<bool>())
    why = "summary does not match the trials";
  return why.empty();
}

void realize_behaviour_cmd(Context &c) {
  const Behaviour p = behaviour_from_json(c.load_one("behaviour"));
  const DIResult r = certify_di(p, c.opt);
  json cert = json::object();
  if (r.realization) {
    c.report["verdict"] = "realized";
    cert["realization"] = realization_json(*r.realization);
    c.report["results"] = {
        {"max_error", max_abs_difference(born_of(r.realization->W, {r.realization->A, r.realization->B,
                                                                    r.realization->C}),
                                         p)}};
  } else {
    c.report["verdict"] = "noncausal";
    cert["inequality"] = to_json(*r.inequality);
    cert["violation"] = r.violation;
  }
  c.report["certificate"] = cert;
}

void realize_assemblage_cmd(Context &c) {
  const Assemblage w = assemblage_from_json(c.load_one("assemblage"));
  const CausalAssemblageResult cr = is_causal_assemblage(w, c.opt);
  json cert = json::object();
  if (!cr.causal) {
    c.report["verdict"] = "noncausal";
    AssemblageWitness f = *cr.witness;
    cert["witness"] = {{"F", json::array()}, {"value", f.value}};
    for (const auto &op : f.F)
      cert["witness"]["F"].push_back(to_json(op));
  } else {
    const AssemblageRealization r = realize_causal_assemblage(w, *cr.decomposition);
    c.report["verdict"] = "realized";
    cert["realization"] = {{"W", to_json(r.W)},
                           {"untrusted", to_json(r.untrusted)},
                           {"decomposition", to_json(r.decomposition)}};
    c.report["results"] = {
        {"max_error", assemblage_difference(assemblage_from_process(r.W, r.untrusted, w.scenario), w)}};
  }
  c.report["certificate"] = cert;
}

bool realize_assemblage_verify(const json &rep, std::string &why) {
  const Assemblage w = assemblage_from_json(stored_one(rep, "assemblage"));
  const json &cert = rep.at("certificate");
  if (cert.contains("realization")) {
    const json &r = cert["realization"];
    const LabeledOperator W = operator_from_json(r.at("W"), "$.certificate.realization.W");
    const ProcessMatrix pm{W, PartyStructure::infer(W.space())};
    const Devices d = devices_from_json(r.at("untrusted"), "$.certificate.realization.untrusted");
    if (validate_process(W, pm.structure).worst() > kDecompositionTol ||
        !decomposition_ok(pm, decomposition_from_json(r.at("decomposition"),
                                                      "$.certificate.realization.decomposition")))
      why = "realizing process is not causally separable";
    else if (assemblage_difference(assemblage_from_process(W, d, w.scenario), w) > kMatchTol)
      why = "realization does not reproduce the assemblage";
  } else {
    AssemblageWitness f;
    std::size_t i = 0;
    for (const auto &op : cert.at("witness").at("F"))
      f.F.push_back(operator_from_json(op, "$.certificate.witness.F[" + std::to_string(i++) + "]"));
    const double v = witness_value(f, w);
    if (!(v < 0) || std::abs(v - cert["witness"].at("value").get<double>()) > 1e-9)
      why = "witness does not separate the assemblage";
  }
  return why.empty();
}

bool realize_behaviour_verify(const json &rep, std::string &why) {
  return certify_di_verify(rep, why);
}

const std::map<std::string, Command> &commands() {
  static const std::map<std::string, Command> table = {
      {"validate-process", {validate_process_cmd, validate_process_verify}},
      {"check-sep", {check_sep_cmd, check_sep_verify}},
      {"validate-instruments", {validate_instruments_cmd, validate_instruments_verify}},
      {"born", {born_cmd, born_verify}},
      {"assemblage", {assemblage_cmd, assemblage_verify}},
      {"certify dd", {certify_dd_cmd, certify_dd_verify}},
      {"certify di", {certify_di_cmd, certify_di_verify}},
      {"certify sdi", {certify_sdi_cmd, certify_sdi_verify}},
      {"gyni", {gyni_cmd, gyni_verify}},
      {"gyni-bound", {gyni_bound_cmd, gyni_bound_verify}},
      {"lemma-check", {lemma_check_cmd, lemma_check_verify}},
      {"switch robustness", {switch_robustness_cmd, switch_robustness_verify}},
      {"switch table2", {switch_table2_cmd, switch_table2_verify}},
      {"switch verify-uut", {switch_verify_uut_cmd, switch_verify_uut_verify}},
      {"realize behaviour", {realize_behaviour_cmd, realize_behaviour_verify}},
      {"realize assemblage", {realize_assemblage_cmd, realize_assemblage_verify}},
  };
  return table;
}

std::string full_name(const RunConfig &cfg) {
  return cfg.subcommand.empty() ? cfg.command : cfg.command + " " + cfg.subcommand;
}

json config_echo(const RunConfig &cfg) {
  json j = {{"format", cfg.format}};
  if (cfg.scenario)
    j["scenario"] = *cfg.scenario;
  if (cfg.tol)
    j["tol"] = *cfg.tol;
  if (cfg.seed)
    j["seed"] = *cfg.seed;
  if (cfg.dim)
    j["dim"] = *cfg.dim;
  if (cfg.trials)
    j["trials"] = *cfg.trials;
  if (cfg.count)
    j["count"] = *cfg.count;
  if (cfg.separable)
    j["separable"] = true;
  if (!cfg.out.empty())
    j["out"] = cfg.out;
  return j;
}

} // namespace

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto &[k, v] : commands())
    out.push_back(k);
  return out;
}

Report run(const RunConfig &cfg) {
  Report rep;
  json &body = rep.body;
  const std::string name = full_name(cfg);
  body["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  body["command"] = name;
  body["config"] = config_echo(cfg);
  try {
    auto it = commands().find(name);
    if (it == commands().end())
      throw InputError("unknown command " + name);
    if (cfg.tol && (*cfg.tol < 1e-12 || *cfg.tol > 1e-3))
      throw InputError("--tol: must lie in [1e-12, 1e-3]");
    if (cfg.format != "json" && cfg.format != "text")
      throw InputError("--format: expected json or text");
    Context ctx{cfg, body, conic::SolverOptions::from_environment()};
    if (cfg.tol)
      ctx.opt.tolerance = *cfg.tol;
    body["solver"] = {{"max_iterations", ctx.opt.max_iterations}, {"tolerance", ctx.opt.tolerance}};
    it->second.run(ctx);
    body["tolerances"] = {{"decomposition", kDecompositionTol},
                          {"psd", kPsdCheckTol},
                          {"match", kMatchTol}};
  } catch (const InputError &e) {
    body["error"] = {{"kind", "invalid-input"}, {"message", e.what()}};
    rep.exit_code = kInvalidInput;
  } catch (const SolverFailure &e) {
    body["error"] = {{"kind", "solver-failure"}, {"message", e.what()}};
    rep.exit_code = kSolverFailure;
  } catch (const std::invalid_argument &e) {
    body["error"] = {{"kind", "invalid-input"}, {"message", e.what()}};
    rep.exit_code = kInvalidInput;
  } catch (const std::length_error &e) {
    body["error"] = {{"kind", "invalid-input"}, {"message", e.what()}};
    rep.exit_code = kInvalidInput;
  } catch (const std::exception &e) {
    body["error"] = {{"kind", "internal"}, {"message", e.what()}};
    rep.exit_code = kInternalError;
  }
  return rep;
}

bool verify_report(const json &report, std::string *problem) {
  std::string why;
  try {
    if (!report.is_object() || !report.contains("command"))
      why = "not a report";
    else if (report.contains("error"))
      why = "report records an error";
    else {
      auto it = commands().find(report["command"].get<std::string>());
      if (it == commands().end())
        why = "unknown command";
      else if (!report.contains("verdict"))
        why = "missing verdict";
      else
        it->second.verify(report, why);
    }
  } catch (const std::exception &e) {
    why = std::string("malformed report: ") + e.what();
  }
  if (problem)
    *problem = why;
  return why.empty();
}

std::string serialize(const json &report) { return report.dump(2) + "\n"; }

namespace {

std::string scalar(const json &v) {
  if (v.is_number_float()) {
    std::ostringstream ss;
    ss << std::setprecision(6) << v.get<double>();
    return ss.str();
  }
  if (v.is_string())
    return v.get<std::string>();
  return v.dump();
}

} // namespace

std::string render_text(const json &report) {
  std::ostringstream out;
  out << report.value("command", "") << "\n";
  if (report.contains("error")) {
    out << "error (" << report["error"]["kind"].get<std::string>()
        << "): " << report["error"]["message"].get<std::string>() << "\n";
    return out.str();
  }
  out << "verdict  " << scalar(report.at("verdict")) << "\n";
  if (!report.contains("results"))
    return out.str();
  const json &res = report["results"];
  if (res.contains("table")) {
    out << std::left << std::setw(10) << "scenario" << std::setw(14) << "eta*" << std::setw(13)
        << "bound" << "outer\n";
    for (const auto &row : res["table"])
      out << std::left << std::setw(10) << scalar(row["scenario"]) << std::setw(14)
          << scalar(row["eta_star"]) << std::setw(13) << scalar(row["bound_kind"])
          << (row["outer_approximation"].get<bool>() ? "yes" : "no") << "\n";
    return out.str();
  }
  for (const auto &[k, v] : res.items())
    if (!v.is_structured())
      out << std::left << std::setw(22) << k << scalar(v) << "\n";
  return out.str();
}

} // namespace causalis::cli
