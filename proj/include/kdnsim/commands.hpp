#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kdnsim/scenario_file.hpp"

namespace kdnsim::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitRuntimeError = 3,
  kExitIoError = 4,
};

struct RunRequest {
  std::optional<std::filesystem::path> scenario_path;
  std::filesystem::path out_dir = "out";
  /// Empty means the scenario's own seed (train/evaluate) or 1..5 (sweep).
  std::vector<std::uint64_t> seeds;
  /// Empty means 20, 60, ..., 300.
  std::vector<int> ue_counts;
  std::optional<int> episodes_override;
  std::optional<std::filesystem::path> qtable;
  std::string host = "127.0.0.1";
  int port = 5555;
  unsigned threads = 0;
};

using Logger = std::function<void(const std::string&)>;

std::vector<int> default_ue_counts();
std::vector<std::uint64_t> default_sweep_seeds();

/// Scenario named by the request (defaults when no path) with overrides applied.
ParsedScenario resolve_scenario(const RunRequest& req);

/// Creates out_dir and writes manifest.json; fails before any compute when
/// the directory is not writable.
void write_manifest(const std::string& command, const RunRequest& req,
                    const ParsedScenario& parsed);

/// qtable.kdnq + learning_curve.csv (episode, epsilon, cumulative_reward).
void cmd_train(const RunRequest& req, const Logger& log = {});

/// episode.csv (per tick) + summary.csv for the scenario's policy on the
/// evaluation world. rl_kdn needs a q-table (req.qtable or out_dir/qtable.kdnq).
void cmd_evaluate(const RunRequest& req, const Logger& log = {});

/// sweep.csv + fig_throughput.csv, fig_latency.csv, fig_packet_loss.csv.
void cmd_sweep(const RunRequest& req, const Logger& log = {});

/// Runs the env bridge until the client closes.
void cmd_serve(const RunRequest& req, const Logger& log = {},
               const std::function<void(int)>& on_listening = {});

/// Human-readable summary of a persisted table.
void cmd_inspect_qtable(const std::filesystem::path& path, std::ostream& out);

/// Maps an in-flight exception to an exit code.
int exit_code_for_current_exception(std::string& message);

}  // namespace kdnsim::cli
