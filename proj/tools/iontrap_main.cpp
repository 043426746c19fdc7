#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "iontrap/errors.hpp"
#include "iontrap/log.hpp"
#include "iontrap/output.hpp"

#include "commands.hpp"

namespace {

// Stable exit codes: 0 ok, 2 config, 3 ion loss, 4 unstable crystal,
// 5 optimizer, 6 gate infeasible.
int run(int argc, char** argv) {
  CLI::App app{"Surface multi-well ion trap simulation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  bool seed_given = false;
  int threads = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "RNG seed")->each([&](const std::string&) {
      seed_given = true;
    });
    cmd->add_option("--threads", threads, "worker thread cap");
  };

  auto* trap_show = app.add_subcommand("trap-show", "potential maps and per-well metrics");
  auto* simulate = app.add_subcommand("simulate", "ion trajectory and equilibrium positions");
  auto* modes = app.add_subcommand("modes", "normal-mode spectrum and interaction matrix");
  auto* optimize = app.add_subcommand("optimize", "DC voltage optimization");
  auto* gate = app.add_subcommand("gate", "MS-gate pulse synthesis and sweeps");
  std::string gate_action;
  gate->add_option("action", gate_action, "solve|sweep")
      ->required()
      ->check(CLI::IsMember({"solve", "sweep"}));
  for (auto* cmd : {trap_show, simulate, modes, optimize, gate}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  iontrap::cli::CommandContext ctx;
  try {
    ctx = iontrap::cli::load_context(config_path, out_dir, seed, seed_given, threads);
  } catch (const iontrap::ConfigError& e) {
    iontrap::log::error("%s", e.what());
    return 2;
  }

  try {
    if (trap_show->parsed()) return iontrap::cli::cmd_trap_show(ctx);
    if (simulate->parsed()) return iontrap::cli::cmd_simulate(ctx);
    if (modes->parsed()) return iontrap::cli::cmd_modes(ctx);
    if (optimize->parsed()) return iontrap::cli::cmd_optimize(ctx);
    if (gate->parsed()) return iontrap::cli::cmd_gate(ctx, gate_action);
  } catch (const iontrap::ConfigError& e) {
    iontrap::log::error("%s", e.what());
    return 2;
  } catch (const iontrap::IonLossEvent& e) {
    iontrap::log::error("%s", e.what());
    return 3;
  } catch (const iontrap::NotATrapError& e) {
    iontrap::log::error("%s", e.what());
    return 4;
  } catch (const iontrap::InfeasibleVoltageError& e) {
    iontrap::log::error("%s", e.what());
    return 5;
  } catch (const iontrap::GateInfeasibleError& e) {
    iontrap::log::error("%s", e.what());
    return 6;
  } catch (const std::exception& e) {
    iontrap::log::error("%s", e.what());
    return 1;
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
