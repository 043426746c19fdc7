#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "iontrap/geometry.hpp"
#include "iontrap/output.hpp"

namespace iontrap::cli {

struct CommandContext {
  nlohmann::json config;
  std::string config_dir;
  std::string out_dir;
  TrapLayout layout;
  Species species;
  std::vector<double> dc_volts;
  MetaInfo meta;
  int threads = 1;
};

CommandContext load_context(const std::string& config_path,
                            const std::string& out_dir, std::uint64_t seed,
                            bool seed_given, int threads);

int cmd_trap_show(CommandContext& ctx);
int cmd_simulate(CommandContext& ctx);
int cmd_modes(CommandContext& ctx);
int cmd_optimize(CommandContext& ctx);
int cmd_gate(CommandContext& ctx, const std::string& action);

} // namespace iontrap::cli
