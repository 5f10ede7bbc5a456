#include "kdnsim/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "kdnsim/env_bridge.hpp"
#include "kdnsim/errors.hpp"
#include "kdnsim/version.hpp"

namespace kdnsim::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void say(const Logger& log, const std::string& m) {
  if (log) log(m);
}

std::uint64_t single_seed(const RunRequest& req, const Scenario& sc, const char* command) {
  if (req.seeds.empty()) return sc.seed;
  if (req.seeds.size() > 1)
    throw ConfigError("--seeds", 0, std::string(command) + " takes a single seed");
  return req.seeds.front();
}

}  // namespace

std::vector<int> default_ue_counts() {
  std::vector<int> out;
  for (int n = 20; n <= 300; n += 40) out.push_back(n);
  return out;
}

std::vector<std::uint64_t> default_sweep_seeds() { return {1, 2, 3, 4, 5}; }

ParsedScenario resolve_scenario(const RunRequest& req) {
  ParsedScenario parsed = req.scenario_path ? parse_scenario(*req.scenario_path)
                                            : parse_scenario_text("");
  if (req.episodes_override) {
    if (*req.episodes_override < 0)
      throw ConfigError("--episodes-override", 0, "constraint violated: episodes ≥ 0");
    parsed.scenario.hyper.episodes = *req.episodes_override;
  }
  return parsed;
}

void write_manifest(const std::string& command, const RunRequest& req,
                    const ParsedScenario& parsed) {
  std::error_code ec;
  fs::create_directories(req.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + req.out_dir.string() + "': " + ec.message());

  nlohmann::json m;
  m["format_version"] = 1;
  m["command"] = command;
  m["scenario_path"] = req.scenario_path ? nlohmann::json(req.scenario_path->string()) : nlohmann::json();
  m["scenario_sha256"] = parsed.sha256;
  m["seed"] = parsed.scenario.seed;
  m["seeds"] = req.seeds;
  m["ue_counts"] = req.ue_counts;
  m["episodes_override"] =
      req.episodes_override ? nlohmann::json(*req.episodes_override) : nlohmann::json();
  m["out_dir"] = req.out_dir.string();
  m["tool_version"] = std::string(kToolVersion);
  m["timestamp"] = utc_timestamp();

  const fs::path path = req.out_dir / "manifest.json";
  auto out = open_output(path);
  out << m.dump(2) << '\n';
  finish(out, path);
}

void cmd_train(const RunRequest& req, const Logger& log) {
  auto parsed = resolve_scenario(req);
  Scenario& sc = parsed.scenario;
  sc.seed = single_seed(req, sc, "train");
  sc.policy = Policy::RlKdn;
  write_manifest("train", req, parsed);

  say(log, "training " + std::to_string(sc.hyper.episodes) + " episodes x " +
               std::to_string(sc.hyper.ticks_per_episode) + " ticks, " +
               std::to_string(sc.ue_count) + " UEs, seed " + std::to_string(sc.seed));
  const auto result = train(sc, sc.hyper);

  save_qtable(result.table, {sc.bins, sc.hyper}, req.out_dir / "qtable.kdnq");
  const fs::path curve = req.out_dir / "learning_curve.csv";
  auto out = open_output(curve);
  out << "episode,epsilon,cumulative_reward\n";
  for (std::size_t e = 0; e < result.rewards.size(); ++e)
    out << e << ',' << num(result.epsilons[e]) << ',' << num(result.rewards[e]) << '\n';
  finish(out, curve);
  say(log, "wrote " + (req.out_dir / "qtable.kdnq").string() + " and " + curve.string());
}

void cmd_evaluate(const RunRequest& req, const Logger& log) {
  auto parsed = resolve_scenario(req);
  Scenario& sc = parsed.scenario;
  sc.seed = single_seed(req, sc, "evaluate");

  QTable table(sc.bins.state_count(), kActionCount);
  if (sc.policy == Policy::RlKdn) {
    const fs::path qpath = req.qtable ? *req.qtable : req.out_dir / "qtable.kdnq";
    if (!fs::exists(qpath))
      throw IoError("rl_kdn evaluation needs a q-table; '" + qpath.string() + "' not found");
    table = load_qtable(qpath, sc.bins).table;
  }
  write_manifest("evaluate", req, parsed);

  say(log, "evaluating " + to_string(sc.policy) + " with " + std::to_string(sc.ue_count) + " UEs");
  const auto res = evaluate(sc, table);

  const fs::path episode = req.out_dir / "episode.csv";
  auto out = open_output(episode);
  out << "tick,throughput_bps,latency_ms,packet_loss,reward\n";
  for (std::size_t t = 0; t < res.ticks(); ++t)
    out << t << ',' << num(res.throughput_bps[t]) << ',' << num(res.latency_ms[t]) << ','
        << num(res.packet_loss[t]) << ',' << num(res.reward[t]) << '\n';
  finish(out, episode);

  const fs::path summary = req.out_dir / "summary.csv";
  auto sum = open_output(summary);
  sum << "policy,ue_count,seed,ticks,mean_throughput_bps,mean_latency_ms,mean_packet_loss,"
         "cumulative_reward,handovers,power_changes\n";
  sum << to_string(sc.policy) << ',' << sc.ue_count << ',' << sc.seed << ',' << res.ticks() << ','
      << num(res.mean_throughput_bps) << ',' << num(res.mean_latency_ms) << ','
      << num(res.mean_packet_loss) << ',' << num(res.cumulative_reward) << ',' << res.handovers
      << ',' << res.power_changes << '\n';
  finish(sum, summary);
  say(log, "wrote " + episode.string() + " and " + summary.string());
}

void cmd_sweep(const RunRequest& req, const Logger& log) {
  auto parsed = resolve_scenario(req);
  const auto counts = req.ue_counts.empty() ? default_ue_counts() : req.ue_counts;
  const auto seeds = req.seeds.empty() ? default_sweep_seeds() : req.seeds;
  for (int n : counts)
    if (n < 1) throw ConfigError("--ue-counts", 0, "constraint violated: ue_count ≥ 1");
  write_manifest("sweep", req, parsed);

  say(log, "sweeping " + std::to_string(counts.size()) + " user counts x " +
               std::to_string(seeds.size()) + " seeds");
  SweepOptions opts;
  opts.threads = req.threads;
  opts.progress = log;
  const auto rows = sweep_users(parsed.scenario, counts, seeds, opts);

  const fs::path sweep = req.out_dir / "sweep.csv";
  auto out = open_output(sweep);
  out << "ue_count,policy,kpi,mean,stddev,n\n";
  for (const auto& row : rows)
    for (Kpi k : {Kpi::Throughput, Kpi::Latency, Kpi::PacketLoss})
      out << row.ue_count << ',' << to_string(row.policy) << ',' << to_string(k) << ','
          << num(row.stats(k).mean) << ',' << num(row.stats(k).stddev) << ',' << row.n << '\n';
  finish(out, sweep);

  struct Figure {
    const char* file;
    Kpi kpi;
    const char* unit;
    double scale;
  };
  for (const Figure& fig : {Figure{"fig_throughput.csv", Kpi::Throughput, "gbps", 1e-9},
                            Figure{"fig_latency.csv", Kpi::Latency, "ms", 1.0},
                            Figure{"fig_packet_loss.csv", Kpi::PacketLoss, "percent", 100.0}}) {
    const fs::path path = req.out_dir / fig.file;
    auto f = open_output(path);
    const std::string u = fig.unit;
    f << "ue_count,rl_kdn_" << u << ",rl_kdn_stddev_" << u << ",idle_baseline_" << u
      << ",idle_baseline_stddev_" << u << '\n';
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
      const auto& rl = rows[i].stats(fig.kpi);
      const auto& base = rows[i + 1].stats(fig.kpi);
      f << rows[i].ue_count << ',' << num(rl.mean * fig.scale) << ',' << num(rl.stddev * fig.scale)
        << ',' << num(base.mean * fig.scale) << ',' << num(base.stddev * fig.scale) << '\n';
    }
    finish(f, path);
  }
  say(log, "wrote " + sweep.string() + " and figure series");
}

void cmd_serve(const RunRequest& req, const Logger& log, const std::function<void(int)>& on_listening) {
  auto parsed = resolve_scenario(req);
  if (!req.seeds.empty()) parsed.scenario.seed = single_seed(req, parsed.scenario, "serve");
  bridge::ServeOptions opts;
  opts.host = req.host;
  opts.port = req.port;
  opts.log = log;
  opts.on_listening = on_listening;
  bridge::serve(parsed.scenario, opts);
}

void cmd_inspect_qtable(const fs::path& path, std::ostream& out) {
  const auto loaded = load_qtable(path);
  const auto& q = loaded.table;
  const auto& hp = loaded.header.hyper;
  out << "states: " << q.states() << "\nactions: " << q.actions() << '\n';
  out << "bins:\n";
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    out << "  " << kFeatureNames[f] << ":";
    for (double b : loaded.header.bins.boundaries[f]) out << ' ' << num(b);
    out << '\n';
  }
  out << "hyper: alpha=" << num(hp.alpha) << " gamma=" << num(hp.gamma) << " epsilon0="
      << num(hp.epsilon0) << " epsilon_min=" << num(hp.epsilon_min) << " epsilon_decay="
      << num(hp.epsilon_decay) << " episodes=" << hp.episodes
      << " ticks_per_episode=" << hp.ticks_per_episode << '\n';

  std::size_t visited_states = 0;
  std::uint64_t total_visits = 0;
  std::vector<std::size_t> greedy_counts(q.actions(), 0);
  for (std::size_t s = 0; s < q.states(); ++s) {
    std::uint64_t row_visits = 0;
    for (std::size_t a = 0; a < q.actions(); ++a) row_visits += q.visits(s, a);
    total_visits += row_visits;
    if (row_visits == 0) continue;
    ++visited_states;
    ++greedy_counts[q.greedy_action(s)];
  }
  out << "visited states: " << visited_states << " / " << q.states() << '\n';
  out << "total updates: " << total_visits << '\n';
  out << "value range: [" << num(q.values().minCoeff()) << ", " << num(q.values().maxCoeff()) << "]\n";
  out << "greedy action over visited states:\n";
  for (std::size_t a = 0; a < q.actions(); ++a)
    out << "  " << kActionNames[a] << ": " << greedy_counts[a] << '\n';
}

int exit_code_for_current_exception(std::string& message) {
  try {
    throw;
  } catch (const ConfigError& e) {
    message = std::string("config error: ") + e.what();
    return kExitConfigError;
  } catch (const InvalidParameter& e) {
    message = std::string("config error: ") + e.what();
    return kExitConfigError;
  } catch (const IncompatibleTable& e) {
    message = std::string("incompatible q-table: ") + e.what();
    return kExitConfigError;
  } catch (const IoError& e) {
    message = std::string("I/O error: ") + e.what();
    return kExitIoError;
  } catch (const std::exception& e) {
    message = std::string("runtime error: ") + e.what();
    return kExitRuntimeError;
  } catch (...) {
    message = "runtime error: unknown exception";
    return kExitRuntimeError;
  }
}

}  // namespace kdnsim::cli
