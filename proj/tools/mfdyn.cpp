// mfdyn: run the mean-field / many-body experiments from a config file.
//
//   mfdyn <hartree|exact|compare|aux|lemmas> --config run.ini --out results/
//         [--seed 7] [--override run.N=2,3] ...
//
// Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 assertion/lemma violation,
// 1 anything else (I/O).

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "mfdyn/experiments.hpp"

using namespace mfdyn;

namespace {

enum Exit { ok = 0, config_error = 2, numerical_failure = 3, violation = 4 };

struct Common {
  std::string config;
  std::string out = "mfdyn_out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

RunConfig resolve(const Common& c) {
  std::vector<std::string> ov = c.overrides;
  if (c.seed) ov.push_back("run.seed=" + std::to_string(*c.seed));
  return load_run_config(c.config, ov);
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

void list(const std::vector<fs::path>& files) {
  for (const auto& f : files) std::cout << "  wrote " << f.string() << '\n';
}

int cmd_hartree(const RunConfig& cfg, const fs::path& out) {
  for (int N : cfg.Ns) {
    const auto r = run_hartree_experiment(cfg, N, out);
    std::printf("hartree N=%d eps=%.6g  energy drift %.3e  orthonormality %.3e  two-route %.3e\n", N, r.epsilon,
                r.energy_drift, r.max_orthonormality_defect, r.max_two_route);
    list(r.files);
  }
  return ok;
}

int cmd_exact(const RunConfig& cfg, const fs::path& out) {
  for (int N : cfg.Ns) {
    const auto r = run_exact_experiment(cfg, N, out);
    std::printf("exact N=%d dim=%lld  norm drift %.3e  energy drift %.3e", N, r.dimension, r.norm_drift, r.energy_drift);
    if (r.krylov_vs_dense >= 0) std::printf("  krylov-vs-dense %.3e", r.krylov_vs_dense);
    std::printf("\n");
    list(r.files);
  }
  return ok;
}

int cmd_compare(const RunConfig& cfg, const fs::path& out) {
  std::vector<CompareRunResult> runs;
  for (int N : cfg.Ns) {
    runs.push_back(run_compare_experiment(cfg, N, out));
    const auto& r = runs.back();
    std::printf("compare N=%d eps=%.6g  final %.6e  max alpha_n %.4e  gauge routes %.2e\n", N, r.epsilon,
                r.final_comparison, r.max_alpha_n, r.max_gauge_route_diff);
    list(r.files);
  }
  list({write_compare_summary(cfg, runs, out)});
  return ok;
}

int cmd_aux(const RunConfig& cfg, const fs::path& out) {
  for (int N : cfg.Ns) {
    const auto r = run_aux_experiment(cfg, N, out);
    std::printf("aux N=%d  norm defect %.3e  max ||aux - gauged|| %.3e\n", N, r.max_norm_defect, r.max_distance);
    list(r.files);
  }
  return ok;
}

int cmd_lemmas(const RunConfig& cfg, const fs::path& out) {
  const LemmaReport rep = run_lemma_experiment(cfg, out);
  for (const auto& c : rep.checks)
    std::printf("%-34s %-9s evals %-8lld violations %-6lld max ratio %.4g\n", c.name.c_str(),
                c.asserted ? "asserted" : "reported", c.evaluations, c.violations, c.max_ratio);
  std::cout << "  wrote " << (out / "lemmas.json").string() << '\n';
  if (rep.asserted_violations() > 0) {
    std::cerr << "lemma violations: " << rep.asserted_violations() << '\n';
    return violation;
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field dynamics lab"};
  app.require_subcommand(1);
  Common common;
  std::string which;
  for (const char* name : {"hartree", "exact", "compare", "aux", "lemmas"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", common.config, "run configuration file");
    sub->add_option("--out", common.out, "output directory")->capture_default_str();
    sub->add_option("--seed", common.seed, "random seed (overrides run.seed)");
    sub->add_option("--override", common.overrides, "section.key=value, repeatable")->take_all();
    sub->callback([&which, name] { which = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config_error;
  }

  try {
    const RunConfig cfg = resolve(common);
    if (which == "aux") require_aux_budget(cfg);
    if (which == "exact" || which == "compare" || which == "aux") require_exact_budget(cfg);
    const fs::path out = prepare_out(common.out);
    if (which == "hartree") return cmd_hartree(cfg, out);
    if (which == "exact") return cmd_exact(cfg, out);
    if (which == "compare") return cmd_compare(cfg, out);
    if (which == "aux") return cmd_aux(cfg, out);
    return cmd_lemmas(cfg, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const ResolutionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical_failure;
  } catch (const IllConditionedError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical_failure;
  } catch (const LemmaViolation& e) {
    std::cerr << "violation: " << e.what() << '\n';
    return violation;
  } catch (const ContractViolation& e) {
    std::cerr << "violation: " << e.what() << '\n';
    return violation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
