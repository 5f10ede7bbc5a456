#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kdnsim/core_model.hpp"
#include "kdnsim/knowledge_plane.hpp"
#include "kdnsim/mobility.hpp"
#include "kdnsim/rng.hpp"

namespace kdnsim {

enum class Policy { RlKdn, IdleBaseline };

std::string to_string(Policy p);
Policy policy_from_string(const std::string& s);

struct TrafficConfig {
  double demand_min_bps = 1e9;
  double demand_max_bps = 1e9;
};

struct Scenario {
  MobilityConfig mobility;
  std::vector<BaseStation> stations;
  int ue_count = 100;
  TrafficConfig traffic;
  RadioConstants radio;
  RewardConfig reward;
  HyperParams hyper;
  StateBins bins;
  std::uint64_t seed = 1;
  Policy policy = Policy::RlKdn;
};

BaseStation make_macro(int id, Vec2 position);
BaseStation make_access_point(int id, Vec2 position);

/// Two macro cells and six THz access points spread evenly over the area.
std::vector<BaseStation> default_stations(const Area& area);

/// Scenario with every default filled in, including the default topology.
Scenario default_scenario();

/// Throws InvalidParameter naming the first violated constraint.
void validate(const Scenario& sc);

/// Lower middle element of a station's power ladder.
double middle_power(const BaseStation& bs);

/// Stations ordered by distance from `ue` (ties by id), excluding its
/// current serving station.
std::vector<int> alternative_stations(const NetworkState& state, int ue_id);

/// Nearest station to `p`, lowest id on ties.
int nearest_station(const std::vector<BaseStation>& stations, const Vec2& p);

/// Applies one control action and refreshes loads and metrics.
void apply_action_in_place(NetworkState& state, int ue_id, Action action,
                           const RadioConstants& rc);
NetworkState apply_action(NetworkState state, int ue_id, Action action,
                          const RadioConstants& rc);

/// Idle policy: never acts.
Action baseline_policy(const NetworkState& state, int ue_id);

/// Telemetry of one UE in a refreshed state.
TelemetrySample telemetry(const NetworkState& state, int ue_id, double speed_mps);

/// Fresh network for `world_seed`: UEs placed uniformly, attached to their
/// nearest station, every station at its middle power level. Metrics are
/// refreshed.
NetworkState initial_state(const Scenario& sc, std::uint64_t world_seed);

/// Result of acting on the current UE.
struct StepOutcome {
  int ue_id = 0;
  Action action = Action::NoOp;
  double reward = 0.0;
  /// Telemetry of the acted-on UE right after the action.
  TelemetrySample observation;
  NetworkKpis kpis;
  bool handover = false;
  bool power_changed = false;
};

/// Stepwise episode shared by run_episode and the env bridge, so both drive
/// the exact same sequence of state changes.
///
/// Usage per tick: begin_tick() moves every UE and returns the UE to act on;
/// observe() gives its telemetry; act() applies an action to it, refreshes,
/// and scores it. The episode is done after ticks_per_episode acts.
class NetworkEnvironment {
 public:
  NetworkEnvironment(const Scenario& sc, std::uint64_t world_seed);

  int begin_tick();
  TelemetrySample observe(int ue_id) const;
  StepOutcome act(Action action);

  bool done() const { return tick_ >= scenario_.hyper.ticks_per_episode; }
  bool in_tick() const { return acting_ue_ >= 0; }
  int acting_ue() const { return acting_ue_; }
  std::int64_t tick() const { return tick_; }
  const NetworkState& state() const { return state_; }
  const Scenario& scenario() const { return scenario_; }

 private:
  Scenario scenario_;
  NetworkState state_;
  std::vector<Rng> mobility_rngs_;
  std::vector<double> speeds_;
  std::int64_t tick_ = 0;
  int acting_ue_ = -1;
};

/// Per-tick record for the optional event log.
struct TickRecord {
  std::int64_t tick = 0;
  int ue_id = 0;
  StateIndex state = 0;
  int action = 0;
  double reward = 0.0;
  StateIndex next_state = 0;
  NetworkKpis kpis;
};

struct EpisodeOptions {
  double epsilon = 0.0;
  /// Apply q_update after every decision.
  bool learn = true;
  /// Seed of mobility and traffic; defaults to the scenario seed.
  std::optional<std::uint64_t> world_seed;
  std::function<void(const TickRecord&)> on_tick;
};

struct EpisodeResult {
  std::vector<double> throughput_bps;
  std::vector<double> latency_ms;
  std::vector<double> packet_loss;
  std::vector<double> reward;

  double mean_throughput_bps = 0.0;
  double mean_latency_ms = 0.0;
  double mean_packet_loss = 0.0;
  double cumulative_reward = 0.0;
  int handovers = 0;
  int power_changes = 0;

  std::size_t ticks() const { return throughput_bps.size(); }
};

/// Drives one episode of the telemetry -> decision -> control loop. Each tick
/// moves every UE, refreshes metrics, then acts on one UE chosen round-robin
/// (tick mod ue_count). With Policy::IdleBaseline the decision is always
/// NoOp and `q` is left untouched.
EpisodeResult run_episode(const Scenario& sc, QTable& q, Rng& agent_rng,
                          const EpisodeOptions& opts);

struct TrainingResult {
  QTable table;
  /// Cumulative reward per training episode.
  std::vector<double> rewards;
  /// Exploration rate used in each episode.
  std::vector<double> epsilons;
};

/// World seed of training episode `episode`.
std::uint64_t training_world_seed(std::uint64_t seed, int episode);
/// World seed of the greedy evaluation episode, shared by both policies.
std::uint64_t evaluation_world_seed(std::uint64_t seed);

TrainingResult train(const Scenario& sc, const HyperParams& hp);

/// Greedy, non-learning evaluation episode on the shared evaluation world.
EpisodeResult evaluate(const Scenario& sc, const QTable& q);

enum class Kpi { Throughput, Latency, PacketLoss };
std::string to_string(Kpi k);

struct KpiStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct SweepRow {
  int ue_count = 0;
  Policy policy = Policy::RlKdn;
  std::size_t n = 0;
  KpiStats throughput_bps;
  KpiStats latency_ms;
  KpiStats packet_loss;

  const KpiStats& stats(Kpi k) const;
};

/// Mean and sample standard deviation (0 for fewer than two values).
KpiStats summarize(const std::vector<double>& values);

struct SweepOptions {
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;
  std::function<void(const std::string&)> progress;
};

/// For every ue_count and seed, evaluates the idle baseline and a freshly
/// trained agent on the same evaluation world. Rows are ordered by ue_count
/// then policy (RL first).
std::vector<SweepRow> sweep_users(const Scenario& scenario_template,
                                  const std::vector<int>& ue_counts,
                                  const std::vector<std::uint64_t>& seeds,
                                  const SweepOptions& opts = {});

}  // namespace kdnsim
