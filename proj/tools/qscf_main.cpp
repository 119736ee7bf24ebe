// qscf: analytic bounds, Monte Carlo sessions, parameter sweeps and a
// three-process networked harness for quantum strong coin flipping.

#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qscf/cli.hpp"

namespace {

using qscf::cli::CommonOptions;

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "scenario config file")
      ->required();
  cmd->add_option("--set", common.overrides,
                  "override a config key, e.g. --set qber=0.031");
  cmd->add_option("--seed", common.seed, "master seed for all random streams");
  cmd->add_option("--random-file", common.random_file,
                  "file of raw random bytes for the protocol bits");
  cmd->add_option("--out", common.out_path, "write output here (default stdout)");
  cmd->add_option("--format", common.format, "output format: json or csv");
  cmd->add_option("--jobs", common.jobs, "worker threads (default 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "quantum strong coin flipping: security analysis and simulation"};
  app.require_subcommand(1);

  std::function<void()> selected;

  qscf::cli::AnalyzeOptions analyze;
  auto* cmd_analyze = app.add_subcommand(
      "analyze", "analytic cheating bounds, abort model and gain");
  add_common(cmd_analyze, analyze.common);
  cmd_analyze->callback([&] { selected = [&] { run_analyze(analyze); }; });

  qscf::cli::SimulateOptions simulate;
  auto* cmd_simulate =
      app.add_subcommand("simulate", "Monte Carlo session of honest flips");
  add_common(cmd_simulate, simulate.common);
  cmd_simulate->add_option("--flips", simulate.n_flips, "number of coin flips");
  cmd_simulate->add_option("--iotable", simulate.iotable_path,
                           "also write the simulated detection table (CSV)");
  cmd_simulate->callback([&] { selected = [&] { run_simulate(simulate); }; });

  qscf::cli::SweepOptions sweep;
  auto* cmd_sweep =
      app.add_subcommand("sweep", "gain map over a (K, mu) grid");
  add_common(cmd_sweep, sweep.common);
  cmd_sweep->add_option("--kind", sweep.kind, "source kind: sps or wcp");
  cmd_sweep->add_option("--k-grid", sweep.k_grid, "K grid values")
      ->delimiter(',');
  cmd_sweep->add_option("--mu-grid", sweep.mu_grid, "mu grid values")
      ->delimiter(',');
  double fixed_a = 0.0;
  auto* fixed_a_opt = cmd_sweep->add_option(
      "--fixed-a", fixed_a, "hold a fixed instead of re-optimizing per cell");
  cmd_sweep->callback([&, fixed_a_opt] {
    if (fixed_a_opt->count() > 0) sweep.fixed_a = fixed_a;
    selected = [&] { run_sweep(sweep); };
  });

  qscf::cli::IoTableOptions iotable;
  auto* cmd_iotable = app.add_subcommand(
      "iotable", "expected or simulated conditional detection table");
  add_common(cmd_iotable, iotable.common);
  cmd_iotable->add_flag("--simulated", iotable.simulated,
                        "Monte Carlo table instead of the expected one");
  cmd_iotable->add_option("--flips", iotable.n_flips,
                          "flips for the simulated table");
  cmd_iotable->callback([&] { selected = [&] { run_iotable(iotable); }; });

  qscf::cli::FairnessOptions fairness;
  auto* cmd_fairness = app.add_subcommand(
      "fairness", "state parameter equalizing both cheating bounds");
  add_common(cmd_fairness, fairness.common);
  cmd_fairness->callback([&] { selected = [&] { run_fairness(fairness); }; });

  qscf::cli::PartyOptions alice;
  auto* cmd_alice = app.add_subcommand("alice", "run the sender process");
  add_common(cmd_alice, alice.common);
  cmd_alice->add_option("--endpoint", alice.endpoint,
                        "physics endpoint (host:port or unix:/path)")
      ->required();
  cmd_alice->add_option("--flips", alice.n_flips, "number of coin flips");
  cmd_alice->callback([&] { selected = [&] { run_alice_party(alice); }; });

  qscf::cli::PartyOptions bob;
  auto* cmd_bob = app.add_subcommand("bob", "run the receiver process");
  add_common(cmd_bob, bob.common);
  cmd_bob->add_option("--endpoint", bob.endpoint,
                      "physics endpoint (host:port or unix:/path)")
      ->required();
  cmd_bob->add_option("--flips", bob.n_flips, "number of coin flips");
  cmd_bob->add_flag("--cheat", bob.cheat, "play the forcing strategy");
  cmd_bob->add_option("--target", bob.cheat_target,
                      "outcome bit the cheating strategy forces");
  cmd_bob->callback([&] { selected = [&] { run_bob_party(bob); }; });

  qscf::cli::PartyOptions physics;
  auto* cmd_physics = app.add_subcommand(
      "physics", "run the trusted channel simulator between alice and bob");
  add_common(cmd_physics, physics.common);
  cmd_physics
      ->add_option("--alice-endpoint", physics.alice_endpoint,
                   "endpoint to serve alice on")
      ->required();
  cmd_physics
      ->add_option("--bob-endpoint", physics.bob_endpoint,
                   "endpoint to serve bob on")
      ->required();
  cmd_physics->add_option("--flips", physics.n_flips, "number of coin flips");
  cmd_physics->callback(
      [&] { selected = [&] { run_physics_party(physics); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? qscf::cli::kExitOk : qscf::cli::kExitConfig;
  }
  return qscf::cli::guarded(selected);
}
