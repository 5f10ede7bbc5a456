#include "kdnsim/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "kdnsim/errors.hpp"

namespace kdnsim {

std::string to_string(Policy p) { return p == Policy::RlKdn ? "rl_kdn" : "idle_baseline"; }

Policy policy_from_string(const std::string& s) {
  if (s == "rl_kdn") return Policy::RlKdn;
  if (s == "idle_baseline") return Policy::IdleBaseline;
  throw InvalidParameter("unknown policy '" + s + "' (expected rl_kdn or idle_baseline)");
}

std::string to_string(Kpi k) {
  switch (k) {
    case Kpi::Throughput: return "throughput_bps";
    case Kpi::Latency: return "latency_ms";
    case Kpi::PacketLoss: return "packet_loss";
  }
  return "?";
}

BaseStation make_macro(int id, Vec2 position) {
  BaseStation bs;
  bs.id = id;
  bs.kind = StationKind::MacroBS;
  bs.position = position;
  bs.carrier_frequency_hz = 3.5e9;
  bs.bandwidth_hz = 100e6;
  bs.power_levels_dbm = {30.0, 36.0, 40.0, 43.0};
  bs.tx_power_dbm = middle_power(bs);
  bs.base_latency_ms = 2.0;
  bs.capacity_ue = 120;
  return bs;
}

BaseStation make_access_point(int id, Vec2 position) {
  BaseStation bs;
  bs.id = id;
  bs.kind = StationKind::AccessPoint;
  bs.position = position;
  bs.carrier_frequency_hz = 300e9;
  bs.bandwidth_hz = 10e9;
  bs.power_levels_dbm = {10.0, 15.0, 20.0, 23.0};
  bs.tx_power_dbm = middle_power(bs);
  bs.base_latency_ms = 2.0;
  bs.capacity_ue = 16;
  return bs;
}

std::vector<BaseStation> default_stations(const Area& area) {
  const double w = area.width_m;
  const double h = area.height_m;
  std::vector<BaseStation> out;
  out.push_back(make_macro(0, {w / 4.0, h / 2.0}));
  out.push_back(make_macro(1, {3.0 * w / 4.0, h / 2.0}));
  int id = 2;
  for (double fy : {0.25, 0.75})
    for (double fx : {1.0 / 6.0, 0.5, 5.0 / 6.0}) out.push_back(make_access_point(id++, {fx * w, fy * h}));
  return out;
}

Scenario default_scenario() {
  Scenario sc;
  sc.stations = default_stations(sc.mobility.area);
  return sc;
}

void validate(const Scenario& sc) {
  if (sc.ue_count < 1) throw InvalidParameter("ue_count must satisfy ue_count >= 1");
  if (sc.stations.empty()) throw InvalidParameter("at least one station is required");
  for (std::size_t b = 0; b < sc.stations.size(); ++b) {
    if (sc.stations[b].id != static_cast<int>(b))
      throw InvalidParameter("station ids must equal their position in the station list");
    validate(sc.stations[b]);
  }
  if (!(sc.traffic.demand_min_bps > 0.0 && sc.traffic.demand_min_bps <= sc.traffic.demand_max_bps))
    throw InvalidParameter("traffic: demand must satisfy 0 < demand_min <= demand_max");
  validate(sc.mobility);
  validate(sc.radio);
  validate(sc.reward);
  validate(sc.hyper);
  validate(sc.bins);
}

double middle_power(const BaseStation& bs) {
  if (bs.power_levels_dbm.empty()) throw InvalidParameter("station has no power levels");
  return bs.power_levels_dbm[(bs.power_levels_dbm.size() - 1) / 2];
}

int nearest_station(const std::vector<BaseStation>& stations, const Vec2& p) {
  if (stations.empty()) throw IntegrityError("no stations");
  int best = 0;
  double best_d = (stations[0].position - p).squaredNorm();
  for (std::size_t b = 1; b < stations.size(); ++b) {
    const double d = (stations[b].position - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(b);
    }
  }
  return best;
}

namespace {

const UserEquipment& ue_at(const NetworkState& state, int ue_id) {
  if (ue_id < 0 || static_cast<std::size_t>(ue_id) >= state.ues.size())
    throw IntegrityError("unknown UE id " + std::to_string(ue_id));
  return state.ues[ue_id];
}

}  // namespace

std::vector<int> alternative_stations(const NetworkState& state, int ue_id) {
  const auto& ue = ue_at(state, ue_id);
  std::vector<std::pair<double, int>> ranked;
  for (const auto& bs : state.stations)
    if (bs.id != ue.serving_bs) ranked.emplace_back((bs.position - ue.position).squaredNorm(), bs.id);
  std::sort(ranked.begin(), ranked.end());
  std::vector<int> out;
  out.reserve(ranked.size());
  for (const auto& [d, id] : ranked) out.push_back(id);
  return out;
}

void apply_action_in_place(NetworkState& state, int ue_id, Action action,
                           const RadioConstants& rc) {
  ue_at(state, ue_id);
  auto& ue = state.ues[ue_id];
  if (const int rank = handover_rank(action); rank > 0) {
    const auto alternatives = alternative_stations(state, ue_id);
    if (static_cast<std::size_t>(rank) <= alternatives.size()) ue.serving_bs = alternatives[rank - 1];
  } else if (action == Action::PowerUp || action == Action::PowerDown) {
    if (ue.serving_bs < 0 || static_cast<std::size_t>(ue.serving_bs) >= state.stations.size())
      throw IntegrityError("UE " + std::to_string(ue_id) + " has a dangling serving station");
    auto& bs = state.stations[ue.serving_bs];
    const int level = bs.power_level_index();
    if (level < 0) throw IntegrityError("station " + std::to_string(bs.id) + " tx power off ladder");
    const int last = static_cast<int>(bs.power_levels_dbm.size()) - 1;
    const int next = std::clamp(level + (action == Action::PowerUp ? 1 : -1), 0, last);
    bs.tx_power_dbm = bs.power_levels_dbm[next];
  }
  refresh_metrics_in_place(state, rc);
}

NetworkState apply_action(NetworkState state, int ue_id, Action action, const RadioConstants& rc) {
  apply_action_in_place(state, ue_id, action, rc);
  return state;
}

Action baseline_policy(const NetworkState& state, int ue_id) {
  ue_at(state, ue_id);
  return Action::NoOp;
}

TelemetrySample telemetry(const NetworkState& state, int ue_id, double speed_mps) {
  const auto& ue = ue_at(state, ue_id);
  if (state.links.size() != state.ues.size()) throw IntegrityError("metrics not refreshed");
  const auto& link = state.links[ue_id];
  const auto& bs = state.stations.at(ue.serving_bs);
  TelemetrySample t;
  t.ue_id = ue_id;
  t.packet_loss = link.packet_loss;
  t.latency_ms = link.latency_ms;
  t.throughput_bps = link.throughput_bps;
  t.speed_mps = speed_mps;
  t.distance_to_serving_m = (bs.position - ue.position).norm();
  t.serving_load_ratio = state.load_ratio(ue.serving_bs);
  return t;
}

namespace {

struct World {
  NetworkState state;
  std::vector<Rng> mobility_rngs;
};

World make_world(const Scenario& sc, std::uint64_t world_seed) {
  validate(sc);
  World w;
  w.state.stations = sc.stations;
  for (auto& bs : w.state.stations) bs.tx_power_dbm = middle_power(bs);
  Rng traffic(derive_seed(world_seed, Stream::Traffic));
  w.state.ues.resize(sc.ue_count);
  w.mobility_rngs.reserve(sc.ue_count);
  for (int i = 0; i < sc.ue_count; ++i) {
    auto& ue = w.state.ues[i];
    ue.id = i;
    w.mobility_rngs.emplace_back(derive_seed(world_seed, Stream::Mobility, static_cast<std::uint64_t>(i)));
    init_mobility(ue, sc.mobility, w.mobility_rngs.back());
    ue.demand_bps = traffic.uniform(sc.traffic.demand_min_bps, sc.traffic.demand_max_bps);
    ue.serving_bs = nearest_station(w.state.stations, ue.position);
  }
  refresh_metrics_in_place(w.state, sc.radio);
  return w;
}

}  // namespace

NetworkState initial_state(const Scenario& sc, std::uint64_t world_seed) {
  return make_world(sc, world_seed).state;
}

NetworkEnvironment::NetworkEnvironment(const Scenario& sc, std::uint64_t world_seed)
    : scenario_(sc) {
  auto world = make_world(scenario_, world_seed);
  state_ = std::move(world.state);
  mobility_rngs_ = std::move(world.mobility_rngs);
  speeds_.assign(state_.ues.size(), 0.0);
}

int NetworkEnvironment::begin_tick() {
  if (done()) throw ProtocolError("episode finished");
  if (in_tick()) throw ProtocolError("tick already started");
  const auto& mob = scenario_.mobility;
  for (std::size_t i = 0; i < state_.ues.size(); ++i) {
    auto& ue = state_.ues[i];
    const Vec2 before = ue.position;
    step_mobility_in_place(ue, mob, mobility_rngs_[i]);
    speeds_[i] = observed_speed(before, ue.position, mob.tick_duration_s);
  }
  state_.tick = tick_;
  refresh_metrics_in_place(state_, scenario_.radio);
  acting_ue_ = static_cast<int>(tick_ % static_cast<std::int64_t>(state_.ues.size()));
  return acting_ue_;
}

TelemetrySample NetworkEnvironment::observe(int ue_id) const {
  return telemetry(state_, ue_id, speeds_.at(static_cast<std::size_t>(ue_id)));
}

StepOutcome NetworkEnvironment::act(Action action) {
  if (!in_tick()) throw ProtocolError("act() without begin_tick()");
  StepOutcome out;
  out.ue_id = acting_ue_;
  out.action = action;
  const int before_bs = state_.ues[acting_ue_].serving_bs;
  const double before_power = state_.stations[before_bs].tx_power_dbm;

  apply_action_in_place(state_, acting_ue_, action, scenario_.radio);

  out.handover = state_.ues[acting_ue_].serving_bs != before_bs;
  out.power_changed = state_.stations[before_bs].tx_power_dbm != before_power;
  out.observation = observe(acting_ue_);
  const auto ratios = state_.load_ratios();
  out.reward = compute_reward(out.observation, ratios, scenario_.reward);
  out.kpis = aggregate_kpis(state_);
  acting_ue_ = -1;
  ++tick_;
  return out;
}

EpisodeResult run_episode(const Scenario& sc, QTable& q, Rng& agent_rng,
                          const EpisodeOptions& opts) {
  if (q.states() != sc.bins.state_count() || q.actions() != static_cast<std::size_t>(kActionCount))
    throw InvalidParameter("Q-table shape does not match the scenario's state space");
  NetworkEnvironment env(sc, opts.world_seed.value_or(sc.seed));
  const bool rl = sc.policy == Policy::RlKdn;

  EpisodeResult res;
  const auto ticks = static_cast<std::size_t>(sc.hyper.ticks_per_episode);
  res.throughput_bps.reserve(ticks);
  res.latency_ms.reserve(ticks);
  res.packet_loss.reserve(ticks);
  res.reward.reserve(ticks);

  while (!env.done()) {
    const int ue = env.begin_tick();
    const StateIndex s = discretize_state(env.observe(ue), sc.bins);
    const Action a = rl ? select_action(q, s, opts.epsilon, agent_rng) : baseline_policy(env.state(), ue);
    const StepOutcome step = env.act(a);
    const StateIndex s_next = discretize_state(step.observation, sc.bins);
    if (rl && opts.learn) q_update(q, s, static_cast<std::size_t>(ordinal(a)), step.reward, s_next, sc.hyper);

    res.throughput_bps.push_back(step.kpis.aggregate_throughput_bps);
    res.latency_ms.push_back(step.kpis.mean_latency_ms);
    res.packet_loss.push_back(step.kpis.mean_packet_loss);
    res.reward.push_back(step.reward);
    res.cumulative_reward += step.reward;
    res.handovers += step.handover ? 1 : 0;
    res.power_changes += step.power_changed ? 1 : 0;
    if (opts.on_tick)
      opts.on_tick({env.tick() - 1, ue, s, ordinal(a), step.reward, s_next, step.kpis});
  }

  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  res.mean_throughput_bps = mean(res.throughput_bps);
  res.mean_latency_ms = mean(res.latency_ms);
  res.mean_packet_loss = mean(res.packet_loss);
  return res;
}

std::uint64_t training_world_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, Stream::Episode, static_cast<std::uint64_t>(episode));
}

std::uint64_t evaluation_world_seed(std::uint64_t seed) {
  return derive_seed(seed, Stream::Evaluation);
}

TrainingResult train(const Scenario& sc, const HyperParams& hp) {
  validate(hp);
  Scenario run = sc;
  run.hyper = hp;
  run.policy = Policy::RlKdn;
  TrainingResult out{QTable(run.bins.state_count(), kActionCount), {}, {}};
  Rng agent(derive_seed(run.seed, Stream::Agent));
  double epsilon = hp.epsilon0;
  for (int e = 0; e < hp.episodes; ++e) {
    EpisodeOptions opts;
    opts.epsilon = epsilon;
    opts.learn = true;
    opts.world_seed = training_world_seed(run.seed, e);
    const auto res = run_episode(run, out.table, agent, opts);
    out.rewards.push_back(res.cumulative_reward);
    out.epsilons.push_back(epsilon);
    epsilon = decay_epsilon(epsilon, hp);
  }
  return out;
}

EpisodeResult evaluate(const Scenario& sc, const QTable& q) {
  QTable frozen = q;
  Rng agent(derive_seed(sc.seed, Stream::Agent, 1));
  EpisodeOptions opts;
  opts.epsilon = 0.0;
  opts.learn = false;
  opts.world_seed = evaluation_world_seed(sc.seed);
  return run_episode(sc, frozen, agent, opts);
}

const KpiStats& SweepRow::stats(Kpi k) const {
  switch (k) {
    case Kpi::Throughput: return throughput_bps;
    case Kpi::Latency: return latency_ms;
    case Kpi::PacketLoss: return packet_loss;
  }
  return throughput_bps;
}

KpiStats summarize(const std::vector<double>& values) {
  KpiStats st;
  if (values.empty()) return st;
  const auto n = static_cast<double>(values.size());
  st.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return st;
  double ss = 0.0;
  for (double v : values) ss += (v - st.mean) * (v - st.mean);
  st.stddev = std::sqrt(ss / (n - 1.0));
  return st;
}

std::vector<SweepRow> sweep_users(const Scenario& scenario_template,
                                  const std::vector<int>& ue_counts,
                                  const std::vector<std::uint64_t>& seeds,
                                  const SweepOptions& opts) {
  if (ue_counts.empty() || seeds.empty()) throw InvalidParameter("sweep needs ue_counts and seeds");

  struct Job {
    int ue_count;
    std::uint64_t seed;
  };
  struct Outcome {
    EpisodeResult rl;
    EpisodeResult baseline;
  };
  std::vector<Job> jobs;
  for (int n : ue_counts)
    for (auto seed : seeds) jobs.push_back({n, seed});

  // Validate every job's scenario up front so workers only see runtime errors.
  for (const auto& job : jobs) {
    Scenario sc = scenario_template;
    sc.ue_count = job.ue_count;
    sc.seed = job.seed;
    validate(sc);
  }

  std::vector<Outcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        Scenario sc = scenario_template;
        sc.ue_count = jobs[j].ue_count;
        sc.seed = jobs[j].seed;

        Scenario base = sc;
        base.policy = Policy::IdleBaseline;
        outcomes[j].baseline = evaluate(base, QTable(sc.bins.state_count(), kActionCount));

        sc.policy = Policy::RlKdn;
        const auto trained = train(sc, sc.hyper);
        outcomes[j].rl = evaluate(sc, trained.table);
        if (opts.progress) {
          std::lock_guard lock(mu);
          opts.progress("ue_count=" + std::to_string(jobs[j].ue_count) +
                        " seed=" + std::to_string(jobs[j].seed) + " done");
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };

  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<SweepRow> rows;
  for (int n : ue_counts) {
    for (Policy p : {Policy::RlKdn, Policy::IdleBaseline}) {
      std::vector<double> thr, lat, loss;
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].ue_count != n) continue;
        const auto& r = p == Policy::RlKdn ? outcomes[j].rl : outcomes[j].baseline;
        thr.push_back(r.mean_throughput_bps);
        lat.push_back(r.mean_latency_ms);
        loss.push_back(r.mean_packet_loss);
      }
      SweepRow row;
      row.ue_count = n;
      row.policy = p;
      row.n = thr.size();
      row.throughput_bps = summarize(thr);
      row.latency_ms = summarize(lat);
      row.packet_loss = summarize(loss);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace kdnsim
