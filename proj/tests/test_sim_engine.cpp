#include <doctest.h>

#include <set>

#include "kdnsim/errors.hpp"
#include "kdnsim/sim_engine.hpp"

using namespace kdnsim;

namespace {

Scenario small_scenario(int ues, int ticks) {
  Scenario sc = default_scenario();
  sc.ue_count = ues;
  sc.hyper.ticks_per_episode = ticks;
  return sc;
}

// Two macros and one AP on a line, with a single UE near the first macro.
NetworkState line_network() {
  NetworkState st;
  st.stations = {make_macro(0, {0.0, 0.0}), make_macro(1, {100.0, 0.0}),
                 make_access_point(2, {30.0, 0.0})};
  UserEquipment ue;
  ue.position = {10.0, 0.0};
  ue.serving_bs = 0;
  st.ues = {ue};
  return refresh_metrics(st, RadioConstants{});
}

}  // namespace

TEST_CASE("apply_action handovers pick the r-th nearest alternative") {
  const RadioConstants rc;
  const NetworkState st = line_network();
  CHECK(alternative_stations(st, 0) == std::vector<int>{2, 1});
  CHECK(apply_action(st, 0, Action::Handover1, rc).ues[0].serving_bs == 2);
  CHECK(apply_action(st, 0, Action::Handover2, rc).ues[0].serving_bs == 1);
  // Only two alternatives exist, so rank 3 is a no-op.
  CHECK(apply_action(st, 0, Action::Handover3, rc).ues[0].serving_bs == 0);
  const auto after = apply_action(st, 0, Action::Handover1, rc);
  CHECK(after.loads == std::vector<int>{0, 0, 1});
}

TEST_CASE("apply_action power steps saturate at the ladder ends") {
  const RadioConstants rc;
  NetworkState st = line_network();
  CHECK(st.stations[0].tx_power_dbm == 36.0);
  st = apply_action(st, 0, Action::PowerUp, rc);
  CHECK(st.stations[0].tx_power_dbm == 40.0);
  st = apply_action(st, 0, Action::PowerUp, rc);
  st = apply_action(st, 0, Action::PowerUp, rc);
  CHECK(st.stations[0].tx_power_dbm == 43.0);
  for (int i = 0; i < 5; ++i) st = apply_action(st, 0, Action::PowerDown, rc);
  CHECK(st.stations[0].tx_power_dbm == 30.0);
  CHECK(st.stations[1].tx_power_dbm == 36.0);
}

TEST_CASE("apply_action NoOp only refreshes") {
  const RadioConstants rc;
  const NetworkState st = line_network();
  const NetworkState after = apply_action(st, 0, Action::NoOp, rc);
  CHECK(after.links == st.links);
  CHECK(after.ues[0].serving_bs == st.ues[0].serving_bs);
  CHECK_THROWS_AS(apply_action(st, 7, Action::NoOp, rc), IntegrityError);
}

TEST_CASE("every UE keeps exactly one valid serving station") {
  Rng rng(61);
  const RadioConstants rc;
  for (int trial = 0; trial < 1000; ++trial) {
    Scenario sc = small_scenario(1 + static_cast<int>(rng.index(30)), 1);
    NetworkState st = initial_state(sc, rng.next_u64());
    for (int k = 0; k < 10; ++k) {
      const int ue = static_cast<int>(rng.index(st.ues.size()));
      apply_action_in_place(st, ue, action_from_ordinal(static_cast<int>(rng.index(6))), rc);
    }
    int total = 0;
    for (int l : st.loads) total += l;
    CHECK(total == sc.ue_count);
    for (const auto& ue : st.ues) {
      CHECK(ue.serving_bs >= 0);
      CHECK(ue.serving_bs < static_cast<int>(st.stations.size()));
    }
    for (const auto& bs : st.stations) CHECK(bs.power_level_index() >= 0);
  }
}

TEST_CASE("initial state attaches UEs to their nearest station at middle power") {
  const Scenario sc = small_scenario(50, 10);
  const NetworkState st = initial_state(sc, 3);
  for (const auto& ue : st.ues) CHECK(ue.serving_bs == nearest_station(st.stations, ue.position));
  for (const auto& bs : st.stations) CHECK(bs.tx_power_dbm == middle_power(bs));
}

TEST_CASE("zero ticks gives an empty episode") {
  const Scenario sc = small_scenario(10, 0);
  QTable q(sc.bins.state_count(), kActionCount);
  Rng rng(1);
  const auto res = run_episode(sc, q, rng, {});
  CHECK(res.ticks() == 0);
  CHECK(res.cumulative_reward == 0.0);
  CHECK(res.mean_throughput_bps == 0.0);
}

TEST_CASE("greedy agent on a zero table matches the idle baseline") {
  Scenario sc = small_scenario(25, 300);
  QTable q(sc.bins.state_count(), kActionCount);
  Rng a(1), b(1);
  EpisodeOptions opts;
  opts.learn = false;
  const auto rl = run_episode(sc, q, a, opts);
  sc.policy = Policy::IdleBaseline;
  const auto base = run_episode(sc, q, b, opts);
  CHECK(rl.throughput_bps == base.throughput_bps);
  CHECK(rl.latency_ms == base.latency_ms);
  CHECK(rl.packet_loss == base.packet_loss);
  CHECK(rl.reward == base.reward);
}

TEST_CASE("baseline never hands over and never changes power") {
  Scenario sc = small_scenario(40, 500);
  sc.policy = Policy::IdleBaseline;
  QTable q(sc.bins.state_count(), kActionCount);
  const QTable untouched = q;
  Rng rng(2);
  const auto res = run_episode(sc, q, rng, {});
  CHECK(res.handovers == 0);
  CHECK(res.power_changes == 0);
  CHECK(q == untouched);
}

TEST_CASE("episodes are deterministic and bounded") {
  const Scenario sc = small_scenario(30, 400);
  auto run = [&] {
    QTable q(sc.bins.state_count(), kActionCount);
    Rng rng(derive_seed(9, Stream::Agent));
    EpisodeOptions opts;
    opts.epsilon = 0.5;
    auto res = run_episode(sc, q, rng, opts);
    return std::make_pair(res, q);
  };
  const auto [r1, q1] = run();
  const auto [r2, q2] = run();
  CHECK(r1.reward == r2.reward);
  CHECK(r1.throughput_bps == r2.throughput_bps);
  CHECK(q1 == q2);
  CHECK(r1.ticks() == 400);
  CHECK(r1.handovers <= 400);
  CHECK(r1.power_changes <= 400);
}

TEST_CASE("episode KPIs respect their invariants") {
  Rng seeds(71);
  for (int trial = 0; trial < 20; ++trial) {
    const Scenario sc = small_scenario(1 + static_cast<int>(seeds.index(60)), 50);
    QTable q(sc.bins.state_count(), kActionCount);
    Rng rng(seeds.next_u64());
    EpisodeOptions opts;
    opts.epsilon = 1.0;
    opts.world_seed = seeds.next_u64();
    std::set<int> acted;
    opts.on_tick = [&](const TickRecord& r) {
      CHECK(r.ue_id == static_cast<int>(r.tick % sc.ue_count));
      CHECK(r.state < sc.bins.state_count());
      CHECK(r.next_state < sc.bins.state_count());
      CHECK(r.kpis.mean_packet_loss >= 0.0);
      CHECK(r.kpis.mean_packet_loss <= 1.0);
      CHECK(r.kpis.mean_latency_ms > 0.0);
      CHECK(r.kpis.aggregate_throughput_bps >= 0.0);
      CHECK(r.reward <= 3.0);
      CHECK(r.reward >= -3.0 - sc.reward.imbalance_weight);
    };
    run_episode(sc, q, rng, opts);
  }
}

TEST_CASE("q-table shape must match the scenario") {
  const Scenario sc = small_scenario(5, 5);
  QTable q(10, kActionCount);
  Rng rng(1);
  CHECK_THROWS_AS(run_episode(sc, q, rng, {}), InvalidParameter);
}

TEST_CASE("train records one curve point per episode") {
  Scenario sc = small_scenario(10, 50);
  HyperParams hp = sc.hyper;
  hp.episodes = 0;
  auto empty = train(sc, hp);
  CHECK(empty.rewards.empty());
  CHECK(empty.table == QTable(sc.bins.state_count(), kActionCount));

  hp.episodes = 4;
  const auto res = train(sc, hp);
  CHECK(res.rewards.size() == 4);
  REQUIRE(res.epsilons.size() == 4);
  CHECK(res.epsilons[0] == hp.epsilon0);
  for (std::size_t e = 1; e < 4; ++e) CHECK(res.epsilons[e] == decay_epsilon(res.epsilons[e - 1], hp));
  CHECK(res.table.visit_counts().sum() == 4u * 50u);
}

TEST_CASE("scenario validation") {
  Scenario sc = default_scenario();
  CHECK_NOTHROW(validate(sc));
  sc.ue_count = 0;
  CHECK_THROWS_AS(validate(sc), InvalidParameter);
  sc = default_scenario();
  sc.stations.clear();
  CHECK_THROWS_AS(validate(sc), InvalidParameter);
  sc = default_scenario();
  sc.traffic.demand_min_bps = 2e9;
  CHECK_THROWS_AS(validate(sc), InvalidParameter);
  CHECK(policy_from_string("idle_baseline") == Policy::IdleBaseline);
  CHECK_THROWS_AS(policy_from_string("greedy"), InvalidParameter);
}

TEST_CASE("summarize uses the sample standard deviation") {
  CHECK(summarize({}).mean == 0.0);
  const auto one = summarize({4.0});
  CHECK(one.mean == 4.0);
  CHECK(one.stddev == 0.0);
  const auto two = summarize({1.0, 3.0});
  CHECK(two.mean == 2.0);
  CHECK(two.stddev == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("small sweep shape and baseline independence from learning settings") {
  Scenario sc = small_scenario(10, 100);
  sc.hyper.episodes = 2;
  const std::vector<int> counts{5, 15};
  const auto rows = sweep_users(sc, counts, {3}, {1, {}});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].ue_count == 5);
  CHECK(rows[0].policy == Policy::RlKdn);
  CHECK(rows[1].policy == Policy::IdleBaseline);
  CHECK(rows[2].ue_count == 15);
  for (const auto& r : rows) {
    CHECK(r.n == 1);
    CHECK(r.throughput_bps.stddev == 0.0);
    CHECK(r.latency_ms.stddev == 0.0);
  }

  Scenario tuned = sc;
  tuned.hyper.alpha = 0.9;
  tuned.hyper.gamma = 0.1;
  tuned.hyper.episodes = 1;
  const auto rows2 = sweep_users(tuned, counts, {3}, {2, {}});
  CHECK(rows2[1].throughput_bps.mean == rows[1].throughput_bps.mean);
  CHECK(rows2[3].latency_ms.mean == rows[3].latency_ms.mean);

  CHECK_THROWS_AS(sweep_users(sc, {}, {1}), InvalidParameter);
}
