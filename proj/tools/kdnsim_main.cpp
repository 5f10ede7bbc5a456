// kdnsim command-line front end: train, evaluate, sweep, serve, inspect-qtable.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "kdnsim/commands.hpp"
#include "kdnsim/version.hpp"

namespace {

void setup_logging(bool quiet) {
  auto logger = spdlog::stderr_logger_mt("kdnsim");
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  logger->flush_on(spdlog::level::info);
  spdlog::set_default_logger(logger);
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("KDNSIM_LOG")) level = spdlog::level::from_str(env);
  if (quiet && level < spdlog::level::warn) level = spdlog::level::warn;
  spdlog::set_level(level);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace kdnsim::cli;

  CLI::App app{"kdnsim: knowledge-defined small-cell network simulator with a Q-learning control plane"};
  app.set_version_flag("--version", std::string(kdnsim::kToolVersion));
  app.require_subcommand(1);

  RunRequest req;
  bool quiet = false;
  std::string scenario;
  std::string qtable;
  int episodes_override = -1;
  app.add_flag("--quiet", quiet, "Only log warnings and errors");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario, "Scenario file (defaults when omitted)")->check(CLI::ExistingFile);
    cmd->add_option("--episodes-override", episodes_override, "Replace learning.episodes");
    cmd->add_flag("--quiet", quiet, "Only log warnings and errors");
  };

  auto* train = app.add_subcommand("train", "Train a Q-table and write its learning curve");
  add_common(train);
  train->add_option("--out", req.out_dir, "Output directory")->required();
  train->add_option("--seeds", req.seeds, "Seed (one value)")->delimiter(',');

  auto* evaluate = app.add_subcommand("evaluate", "Run one greedy evaluation episode");
  add_common(evaluate);
  evaluate->add_option("--out", req.out_dir, "Output directory")->required();
  evaluate->add_option("--seeds", req.seeds, "Seed (one value)")->delimiter(',');
  evaluate->add_option("--qtable", qtable, "Q-table for rl_kdn (default: <out>/qtable.kdnq)");

  auto* sweep = app.add_subcommand("sweep", "Compare RL and idle baseline across user counts");
  add_common(sweep);
  sweep->add_option("--out", req.out_dir, "Output directory")->required();
  sweep->add_option("--seeds", req.seeds, "Paired seeds, comma separated (default 1,2,3,4,5)")
      ->delimiter(',');
  sweep->add_option("--ue-counts", req.ue_counts, "User counts, comma separated (default 20..300 step 40)")
      ->delimiter(',');
  sweep->add_option("--threads", req.threads, "Worker threads (0 = hardware concurrency)");

  auto* serve = app.add_subcommand("serve", "Expose the simulation over the env-bridge protocol");
  add_common(serve);
  serve->add_option("--port", req.port, "TCP port (0 = OS-assigned)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", req.host, "IPv4 address to bind");
  serve->add_option("--seeds", req.seeds, "Default world seed for reset (one value)")->delimiter(',');

  auto* inspect = app.add_subcommand("inspect-qtable", "Summarize a persisted Q-table");
  std::string inspect_path;
  inspect->add_option("path", inspect_path, "Q-table file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfigError;
  }

  setup_logging(quiet);
  if (!scenario.empty()) req.scenario_path = scenario;
  if (!qtable.empty()) req.qtable = qtable;
  if (episodes_override >= 0) req.episodes_override = episodes_override;
  const Logger log = [](const std::string& m) { spdlog::info("{}", m); };

  try {
    if (*train) {
      cmd_train(req, log);
    } else if (*evaluate) {
      cmd_evaluate(req, log);
    } else if (*sweep) {
      cmd_sweep(req, log);
    } else if (*serve) {
      cmd_serve(req, log, [](int port) {
        std::cout << "listening on port " << port << std::endl;
      });
    } else if (*inspect) {
      cmd_inspect_qtable(inspect_path, std::cout);
    }
  } catch (...) {
    std::string message;
    const int rc = exit_code_for_current_exception(message);
    spdlog::error("{}", message);
    return rc;
  }
  return kExitOk;
}
