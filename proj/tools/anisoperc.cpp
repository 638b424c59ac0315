#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "anisoperc/cli.hpp"

namespace ac = anisoperc::cli;

int main(int argc, char** argv) {
  CLI::App app{"Anisotropic bond percolation on Z^d x Z^s: sampling, coupling and critical-curve estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", anisoperc::kToolVersion);

  struct Flags {
    std::string manifest;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::string out;
    bool trace = false;
    std::string curve;
  } flags;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"sample", "sample configurations and emit cluster statistics"},
      {"explore", "run the dynamical coupling and audit every trace"},
      {"qc-scan", "estimate q_c(p) by bisection and compare with 8 d^2 (p_c - p)"},
      {"fit", "fit the crossover exponent to a curve CSV"},
      {"check", "deterministic arithmetic checks of the effective parameters"},
      {"equivalence", "compare |C(0)| laws of the plain box and the collapsed multigraph"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--manifest", flags.manifest, "experiment manifest (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed (overrides seeds.master)");
    sub->add_option("--workers", flags.workers, "replica worker threads (default: all cores)");
    sub->add_option("--out", flags.out,
                    std::string("output directory (default: output.dir, then $") + ac::kOutEnv + ", then ./" +
                        ac::kDefaultOut + ")");
    sub->add_flag("--trace", flags.trace, "write step-level traces where supported");
    if (name == "fit") sub->add_option("--curve", flags.curve, "curve CSV (overrides fit.input)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ac::usage_error;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    ac::Context ctx;
    ctx.manifest = ac::default_manifest(command);
    if (!flags.manifest.empty()) ctx.manifest = anisoperc::load_manifest(flags.manifest, ctx.manifest);
    if (flags.seed) ctx.manifest.seed = *flags.seed;
    ctx.workers = flags.workers ? std::max(1u, *flags.workers) : anisoperc::default_workers();
    ctx.out = ac::resolve_out(flags.out, ctx.manifest);
    ctx.trace = flags.trace;

    if (command == "sample") return ac::run_sample(ctx);
    if (command == "explore") return ac::run_explore(ctx);
    if (command == "qc-scan") return ac::run_qc_scan(ctx);
    if (command == "fit") return ac::run_fit(ctx, flags.curve);
    if (command == "check") return ac::run_checks(ctx);
    if (command == "equivalence") return ac::run_equivalence(ctx);
  } catch (const anisoperc::ManifestError& e) {
    std::cerr << "manifest error: " << e.what() << "\n";
    return ac::usage_error;
  } catch (const anisoperc::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ac::usage_error;
  } catch (const anisoperc::UnsupportedVariant& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return ac::usage_error;
  } catch (const anisoperc::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return ac::check_failed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ac::check_failed;
  }
  return ac::usage_error;
}
