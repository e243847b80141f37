// ibflab: command-line front end for the flow experiments.
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ibf/config.hpp"
#include "ibf/runner.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
  bool strict = false;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration")->required();
  sub->add_option("--seed", f.seed, "master seed (overrides the config)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--threads", f.threads, "replica worker threads")->check(CLI::Range(1u, 1024u));
  sub->add_flag("--strict", f.strict, "exit 4 on any unreliable estimate");
}

int run(ibf::cli::Experiment experiment, const Flags& f) {
  using namespace ibf::cli;
  std::ifstream in(f.config);
  if (!in) {
    std::cerr << "config: cannot read " << f.config << '\n';
    return 2;
  }
  std::stringstream text;
  text << in.rdbuf();
  RunConfig cfg;
  try {
    cfg = parse_config(text.str(), f.seed);
    if (cfg.experiment && *cfg.experiment != experiment) {
      throw ibf::ConfigError("experiment", "config selects '" +
                                               std::string(name(*cfg.experiment)) +
                                               "', not '" + std::string(name(experiment)) + "'");
    }
    require_blocks(cfg, experiment);
  } catch (const ibf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  RunOptions opts;
  opts.experiment = experiment;
  opts.out_dir = !f.out.empty() ? f.out : !cfg.output_dir.empty() ? cfg.output_dir : ".";
  opts.threads = f.threads;
  opts.strict = f.strict;
  try {
    const auto outcome = ibf::cli::run(cfg, opts, std::cerr);
    const int status = exit_status(outcome, f.strict);
    if (status != 0) std::cerr << "unreliable estimate (strict mode)\n";
    return status;
  } catch (const ibf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  using ibf::cli::Experiment;
  CLI::App app{"Planar isotropic Brownian flow laboratory"};
  app.require_subcommand(1);
  Flags flags;
  const std::pair<Experiment, const char*> commands[] = {
      {Experiment::cov_check, "normalization, symmetry, kappa bound and increment covariance"},
      {Experiment::diffusivity, "one-point diffusivity"},
      {Experiment::lyapunov, "Lyapunov exponents by QR renormalization"},
      {Experiment::stable_norm, "hitting-time stable norm and K"},
      {Experiment::shape, "shape-theorem inclusion probabilities"},
      {Experiment::persistence, "diameter persistence of curve images"},
      {Experiment::support, "Hausdorff distance to Lip(K)"},
      {Experiment::scaling, "K of the rescaled covariance against r K"},
      {Experiment::suite, "every experiment in sequence"},
  };
  std::optional<Experiment> chosen;
  for (const auto& [e, help] : commands) {
    auto* sub = app.add_subcommand(std::string(ibf::cli::name(e)), help);
    add_flags(sub, flags);
    sub->callback([&chosen, e = e] { chosen = e; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return run(*chosen, flags);
}
