// thnse run | converge | lei | probe
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 solver failure.
// THNSE_THREADS caps the worker threads used by the diagnostics.

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "thnse/experiments.hpp"

namespace {

struct Overrides
{
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool force_theta_half = false;
  std::optional<std::string> phi;
  std::vector<std::string> snapshots;
};

void add_common(CLI::App* cmd, Overrides& o, bool config_required)
{
  auto* c = cmd->add_option("--config", o.config, "experiment file (key = value, schema = 1)");
  if (config_required)
    c->required();
  cmd->add_option("--out", o.out, "output directory (overrides 'out')");
  cmd->add_option("--seed", o.seed, "random seed (overrides 'seed')");
  cmd->add_flag("--force-theta-half", o.force_theta_half, "admit theta = 1/2 (gap-formula exploration only)");
}

thnse::ExperimentConfig resolve(const Overrides& o)
{
  thnse::ExperimentConfig cfg;
  if (!o.config.empty())
    cfg = thnse::load_config(o.config);
  if (o.out)
    cfg.out = *o.out;
  if (o.seed)
    cfg.seed = *o.seed;
  if (o.force_theta_half)
    cfg.force_theta_half = true;
  if (o.phi)
    thnse::apply_config_value(cfg, "phi", {*o.phi});
  return cfg;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"theta-scheme Navier-Stokes experiments on the periodic torus"};
  app.require_subcommand(1);
  Overrides o;

  auto* run = app.add_subcommand("run", "run the scheme; writes snapshots.bin, energy_ledger.csv, summary.csv");
  add_common(run, o, true);
  auto* converge = app.add_subcommand("converge", "Taylor-Green refinement ladder; writes convergence.csv");
  add_common(converge, o, true);
  auto* lei = app.add_subcommand("lei", "local energy balance and remainders; writes lei_report.csv");
  add_common(lei, o, false);
  lei->add_option("--snapshot", o.snapshots, "snapshot file (repeat for a ladder, coarse to fine)");
  lei->add_option("--phi", o.phi, "test functions: all, or a list of 0,1,2");
  auto* probe = app.add_subcommand("probe", "coercivity, inverse and commutator probes; writes probes.csv");
  add_common(probe, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : thnse::exit_config;
  }

  return thnse::run_guarded(
      [&]() {
        const thnse::ExperimentConfig cfg = resolve(o);
        if (run->parsed())
          return thnse::cmd_run(cfg, std::cout);
        if (converge->parsed())
          return thnse::cmd_converge(cfg, std::cout);
        if (lei->parsed())
          return thnse::cmd_lei(cfg, o.snapshots, std::cout);
        return thnse::cmd_probe(cfg, std::cout);
      },
      std::cerr);
}
