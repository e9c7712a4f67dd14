#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace causalis::cli;

namespace {

struct Flags {
  std::vector<std::string> in, process, instruments, behaviour, assemblage, report;
};

void add_common(CLI::App *app, RunConfig &cfg) {
  app->add_option("--tol", cfg.tol, "solver tolerance in [1e-12, 1e-3]");
  app->add_option("--out", cfg.out, "write the report here instead of stdout");
  app->add_option("--format", cfg.format, "json or text");
}

int emit(const RunConfig &cfg, const json &body, int code) {
  const std::string text = cfg.format == "text" ? render_text(body) : serialize(body);
  if (cfg.out.empty()) {
    std::cout << text;
    return code;
  }
  std::ofstream out(cfg.out, std::ios::binary);
  if (!out) {
    std::cerr << "cannot write " << cfg.out << "\n";
    return kInvalidInput;
  }
  out << text;
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Certification of indefinite causal order"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  RunConfig cfg;
  Flags f;
  std::string report_path;

  auto leaf = [&](CLI::App *parent, const std::string &name, const std::string &help) {
    CLI::App *c = parent->add_subcommand(name, help);
    add_common(c, cfg);
    return c;
  };

  auto *vp = leaf(&app, "validate-process", "check that an operator is a valid process matrix");
  vp->add_option("--in", f.in)->required();
  auto *cs = leaf(&app, "check-sep", "decide causal separability of a process matrix");
  cs->add_option("--in", f.in)->required();
  auto *vi = leaf(&app, "validate-instruments", "check an instrument set or POVM");
  vi->add_option("--in", f.in)->required();
  auto *bo = leaf(&app, "born", "behaviour of a process under instruments");
  bo->add_option("--process", f.process)->required();
  bo->add_option("--instruments", f.instruments)->required();
  auto *as = leaf(&app, "assemblage", "assemblage of a process in a scenario");
  as->add_option("--process", f.process)->required();
  as->add_option("--instruments", f.instruments)->required();
  as->add_option("--scenario", cfg.scenario)->required();

  auto *certify = app.add_subcommand("certify", "certify noncausality of a behaviour");
  certify->require_subcommand(1);
  auto *dd = leaf(certify, "dd", "device-dependent");
  dd->add_option("--behaviour", f.behaviour)->required();
  dd->add_option("--instruments", f.instruments)->required();
  auto *di = leaf(certify, "di", "device-independent");
  di->add_option("--behaviour", f.behaviour)->required();
  auto *sdi = leaf(certify, "sdi", "semi-device-independent");
  sdi->add_option("--behaviour", f.behaviour)->required();
  sdi->add_option("--instruments", f.instruments, "trusted devices");
  sdi->add_option("--scenario", cfg.scenario)->required();

  auto *gy = leaf(&app, "gyni", "GYNI success of a behaviour, or its maximum over processes");
  gy->add_option("--behaviour", f.behaviour);
  gy->add_option("--instruments", f.instruments);
  gy->add_flag("--separable", cfg.separable, "restrict to causally separable processes");
  auto *gb = leaf(&app, "gyni-bound", "dimension bound on GYNI success");
  gb->add_option("--dim", cfg.dim)->required();
  auto *lc = leaf(&app, "lemma-check", "positivity margin of a bipartite PSD operator");
  lc->add_option("--in", f.in);
  lc->add_option("--count", cfg.count);
  lc->add_option("--seed", cfg.seed);

  auto *sw = app.add_subcommand("switch", "quantum switch robustness");
  sw->require_subcommand(1);
  auto *rob = leaf(sw, "robustness", "critical noise for one scenario");
  rob->add_option("--scenario", cfg.scenario)->required();
  leaf(sw, "table2", "critical noise for all six scenarios");
  auto *uut = leaf(sw, "verify-uut", "randomized causality check of UUT assemblages");
  uut->add_option("--trials", cfg.trials);
  uut->add_option("--seed", cfg.seed);

  auto *realize = app.add_subcommand("realize", "construct a causal realization");
  realize->require_subcommand(1);
  auto *rb = leaf(realize, "behaviour", "process and instruments for a causal behaviour");
  rb->add_option("--behaviour", f.behaviour)->required();
  auto *ra = leaf(realize, "assemblage", "process and devices for a causal assemblage");
  ra->add_option("--assemblage", f.assemblage)->required();

  auto *ver = app.add_subcommand("verify", "re-check the certificates of a report");
  ver->add_option("--report", report_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidInput;
  }

  if (ver->parsed()) {
    try {
      std::string problem;
      const bool ok = verify_report(read_json_file(report_path), &problem);
      std::cout << (ok ? "verified" : "rejected: " + problem) << "\n";
      return ok ? kOk : kRejected;
    } catch (const std::exception &e) {
      std::cerr << e.what() << "\n";
      return kInvalidInput;
    }
  }

  for (CLI::App *top : app.get_subcommands()) {
    cfg.command = top->get_name();
    for (CLI::App *sub : top->get_subcommands())
      cfg.subcommand = sub->get_name();
  }
  auto put = [&](const char *key, const std::vector<std::string> &v) {
    if (!v.empty())
      cfg.inputs[key] = v;
  };
  put("in", f.in);
  put("process", f.process);
  put("instruments", f.instruments);
  put("behaviour", f.behaviour);
  put("assemblage", f.assemblage);

  const Report r = run(cfg);
  if (r.body.contains("error"))
    std::cerr << r.body["error"]["message"].get<std::string>() << "\n";
  return emit(cfg, r.body, r.exit_code);
}
