#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "kdnsim/errors.hpp"
#include "kdnsim/knowledge_plane.hpp"

using namespace kdnsim;

namespace {

TelemetrySample zero_sample() { return {}; }

// A sample whose feature f sits in bin `bin` under `bins`.
double value_in_bin(const StateBins& bins, std::size_t f, std::size_t bin) {
  const auto& b = bins.boundaries[f];
  if (bin == 0) return b.empty() ? 0.0 : b.front() - 1.0;
  return b[bin - 1];  // boundaries belong to the upper bin
}

TelemetrySample sample_from_bins(const StateBins& bins, const std::array<std::size_t, 6>& ids) {
  std::array<double, 6> x{};
  for (std::size_t f = 0; f < 6; ++f) x[f] = value_in_bin(bins, f, ids[f]);
  TelemetrySample t;
  t.packet_loss = x[0];
  t.latency_ms = x[1];
  t.throughput_bps = x[2];
  t.speed_mps = x[3];
  t.distance_to_serving_m = x[4];
  t.serving_load_ratio = x[5];
  return t;
}

}  // namespace

TEST_CASE("default bins give 486 states") {
  StateBins bins;
  CHECK(bins.state_count() == 486);
}

TEST_CASE("discretize_state examples") {
  StateBins bins;
  CHECK(discretize_state(zero_sample(), bins) == 0);

  TelemetrySample top;
  top.packet_loss = 0.5;
  top.latency_ms = 500;
  top.throughput_bps = 5e9;
  top.speed_mps = 30;
  top.distance_to_serving_m = 400;
  top.serving_load_ratio = 3;
  CHECK(discretize_state(top, bins) == 485);

  TelemetrySample loss1;
  loss1.packet_loss = 0.02;
  CHECK(discretize_state(loss1, bins) == 162);

  // A value equal to a boundary falls in the upper bin.
  TelemetrySample on_edge;
  on_edge.packet_loss = 0.01;
  CHECK(discretize_state(on_edge, bins) == 162);
}

TEST_CASE("discretize_state rejects NaN") {
  TelemetrySample t;
  t.latency_ms = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(discretize_state(t, StateBins{}), InvalidTelemetry);
}

TEST_CASE("discretize_state is a bijection from bin tuples onto [0, S)") {
  StateBins bins;
  std::set<StateIndex> seen;
  std::array<std::size_t, 6> ids{};
  for (ids[0] = 0; ids[0] < 3; ++ids[0])
    for (ids[1] = 0; ids[1] < 3; ++ids[1])
      for (ids[2] = 0; ids[2] < 3; ++ids[2])
        for (ids[3] = 0; ids[3] < 2; ++ids[3])
          for (ids[4] = 0; ids[4] < 3; ++ids[4])
            for (ids[5] = 0; ids[5] < 3; ++ids[5]) {
              const auto s = discretize_state(sample_from_bins(bins, ids), bins);
              CHECK(s < bins.state_count());
              CHECK(feature_bins(sample_from_bins(bins, ids), bins) == ids);
              seen.insert(s);
            }
  CHECK(seen.size() == 486);
}

TEST_CASE("discretize_state is total over random finite samples") {
  StateBins bins;
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    TelemetrySample t;
    t.packet_loss = rng.uniform(-1, 2);
    t.latency_ms = rng.uniform(-1e3, 1e3);
    t.throughput_bps = rng.uniform(-1e10, 1e10);
    t.speed_mps = rng.uniform(0, 100);
    t.distance_to_serving_m = rng.uniform(0, 1e4);
    t.serving_load_ratio = rng.uniform(0, 10);
    CHECK(discretize_state(t, bins) < 486);
  }
}

TEST_CASE("bins must be strictly increasing") {
  StateBins bins;
  bins.boundaries[2] = {1.0, 1.0};
  CHECK_THROWS_AS(validate(bins), InvalidParameter);
}

TEST_CASE("select_action greedy examples") {
  QTable q(1, 6);
  Rng rng(1);
  const std::array<double, 6> row{0.2, 0.5, 0.1, 0, 0, 0};
  for (std::size_t a = 0; a < 6; ++a) q.set_value(0, a, row[a]);
  CHECK(select_action(q, 0, 0.0, rng) == Action::Handover1);

  QTable flat(1, 6);
  CHECK(select_action(flat, 0, 0.0, rng) == Action::NoOp);
  for (std::size_t a = 0; a < 6; ++a) flat.set_value(0, a, -3.25);
  CHECK(select_action(flat, 0, 0.0, rng) == Action::NoOp);

  CHECK_THROWS_AS(select_action(q, 0, 1.5, rng), InvalidParameter);
}

TEST_CASE("select_action with epsilon = 1 is uniform") {
  QTable q(1, 6);
  q.set_value(0, 3, 100.0);
  Rng rng(12345);
  std::array<int, 6> counts{};
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[select_action_ordinal(q, 0, 1.0, rng)];
  const double p = 1.0 / 6.0;
  const double expected = n * p;
  const double sigma = std::sqrt(n * p * (1 - p));
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - expected) < 5 * sigma);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // Upper 0.001 quantile of chi-square with 5 degrees of freedom.
  CHECK(chi2 < 20.515);
}

TEST_CASE("argmax is invariant to positive row scaling") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    QTable q(1, 6);
    for (std::size_t a = 0; a < 6; ++a) q.set_value(0, a, rng.uniform(-5, 5));
    const auto before = q.greedy_action(0);
    const double c = rng.uniform(1e-3, 1e3);
    q.values() *= c;
    CHECK(q.greedy_action(0) == before);
  }
}

TEST_CASE("q_update examples") {
  HyperParams hp;
  SUBCASE("single step from zero") {
    QTable q(4, 6);
    hp.alpha = 0.1;
    hp.gamma = 0.9;
    q_update(q, 1, 2, 1.0, 3, hp);
    CHECK(std::abs(q.value(1, 2) - 0.1) < 1e-12);
    CHECK(q.visits(1, 2) == 1);
  }
  SUBCASE("Bellman fixed point") {
    QTable q(4, 6);
    hp.alpha = 0.1;
    hp.gamma = 0.5;
    q.set_value(0, 0, 2.0);
    q.set_value(2, 4, 2.0);
    q_update(q, 0, 0, 1.0, 2, hp);
    CHECK(std::abs(q.value(0, 0) - 2.0) < 1e-12);
  }
  SUBCASE("alpha = 1 overwrites with the target") {
    QTable q(4, 6);
    hp.alpha = 1.0;
    hp.gamma = 0.9;
    q.set_value(0, 1, -7.0);
    q.set_value(3, 5, 4.0);
    q_update(q, 0, 1, 0.5, 3, hp);
    CHECK(std::abs(q.value(0, 1) - (0.5 + 0.9 * 4.0)) < 1e-12);
  }
}

TEST_CASE("q_update touches exactly one cell") {
  Rng rng(21);
  HyperParams hp;
  QTable q(20, 6);
  for (int i = 0; i < 1000; ++i) {
    const QTable before = q;
    const auto s = rng.index(20);
    const auto a = rng.index(6);
    q_update(q, s, a, rng.uniform(-3, 3), rng.index(20), hp);
    for (std::size_t ss = 0; ss < 20; ++ss)
      for (std::size_t aa = 0; aa < 6; ++aa) {
        if (ss == s && aa == a) {
          CHECK(q.visits(ss, aa) == before.visits(ss, aa) + 1);
        } else {
          CHECK(q.value(ss, aa) == before.value(ss, aa));
          CHECK(q.visits(ss, aa) == before.visits(ss, aa));
        }
      }
  }
}

TEST_CASE("Q-values stay within R / (1 - gamma)") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    HyperParams hp;
    hp.alpha = rng.uniform(0.01, 1.0);
    hp.gamma = rng.uniform(0.0, 0.99);
    const double r_max = rng.uniform(0.1, 10.0);
    const double bound = r_max / (1.0 - hp.gamma);
    QTable q(8, 6);
    for (std::size_t s = 0; s < 8; ++s)
      for (std::size_t a = 0; a < 6; ++a) q.set_value(s, a, rng.uniform(-bound, bound));
    for (int k = 0; k < 200; ++k)
      q_update(q, rng.index(8), rng.index(6), rng.uniform(-r_max, r_max), rng.index(8), hp);
    CHECK(q.values().maxCoeff() <= bound * (1 + 1e-12));
    CHECK(q.values().minCoeff() >= -bound * (1 + 1e-12));
  }
}

TEST_CASE("q_update leaves the optimal Q of a deterministic MDP unchanged") {
  Rng rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_s = 2 + rng.index(8);
    const std::size_t n_a = 2 + rng.index(4);
    HyperParams hp;
    hp.gamma = rng.uniform(0.0, 0.95);
    hp.alpha = rng.uniform(0.05, 1.0);
    std::vector<std::vector<std::size_t>> next(n_s, std::vector<std::size_t>(n_a));
    std::vector<std::vector<double>> reward(n_s, std::vector<double>(n_a));
    for (std::size_t s = 0; s < n_s; ++s)
      for (std::size_t a = 0; a < n_a; ++a) {
        next[s][a] = rng.index(n_s);
        reward[s][a] = rng.uniform(-1, 1);
      }
    // Value iteration oracle.
    std::vector<double> v(n_s, 0.0);
    for (int it = 0; it < 5000; ++it) {
      double res = 0.0;
      std::vector<double> nv(n_s);
      for (std::size_t s = 0; s < n_s; ++s) {
        double best = -1e300;
        for (std::size_t a = 0; a < n_a; ++a) best = std::max(best, reward[s][a] + hp.gamma * v[next[s][a]]);
        nv[s] = best;
        res = std::max(res, std::abs(nv[s] - v[s]));
      }
      v = nv;
      if (res < 1e-14) break;
    }
    QTable q(n_s, n_a);
    for (std::size_t s = 0; s < n_s; ++s)
      for (std::size_t a = 0; a < n_a; ++a) q.set_value(s, a, reward[s][a] + hp.gamma * v[next[s][a]]);
    const std::size_t s = rng.index(n_s);
    const std::size_t a = rng.index(n_a);
    const double before = q.value(s, a);
    q_update(q, s, a, reward[s][a], next[s][a], hp);
    CHECK(std::abs(q.value(s, a) - before) < 1e-12);
  }
}

TEST_CASE("jain_fairness") {
  const std::vector<double> balanced{2, 2, 2};
  const std::vector<double> skew{4, 0};
  const std::vector<double> zeros{0, 0, 0};
  CHECK(jain_fairness(balanced) == doctest::Approx(1.0));
  CHECK(jain_fairness(skew) == doctest::Approx(0.5));
  CHECK(jain_fairness(zeros) == 1.0);
}

TEST_CASE("compute_reward examples") {
  RewardConfig rc;
  TelemetrySample good;
  good.latency_ms = 5;
  good.packet_loss = 0.001;
  good.throughput_bps = 0.9e9;
  TelemetrySample bad;
  bad.latency_ms = 50;
  bad.packet_loss = 0.2;
  bad.throughput_bps = 1e6;
  const std::vector<double> balanced{0.5, 0.5};
  CHECK(compute_reward(good, balanced, rc) == doctest::Approx(3.0));
  CHECK(compute_reward(bad, balanced, rc) == doctest::Approx(-3.0));
  const std::vector<double> skew{4, 0};
  rc.imbalance_weight = 1.0;
  CHECK(compute_reward(good, skew, rc) == doctest::Approx(2.5));
}

TEST_CASE("compute_reward stays in [-3 - lambda, 3]") {
  Rng rng(51);
  for (int i = 0; i < 1000; ++i) {
    RewardConfig rc;
    rc.imbalance_weight = rng.uniform(0, 5);
    TelemetrySample t;
    t.latency_ms = rng.uniform(0, 40);
    t.packet_loss = rng.uniform(0, 0.05);
    t.throughput_bps = rng.uniform(0, 1e9);
    std::vector<double> loads(1 + rng.index(10));
    for (auto& l : loads) l = rng.uniform01() < 0.3 ? 0.0 : rng.uniform(0, 3);
    const double r = compute_reward(t, loads, rc);
    CHECK(r <= 3.0 + 1e-12);
    CHECK(r >= -3.0 - rc.imbalance_weight - 1e-12);
  }
}

TEST_CASE("decay_epsilon") {
  HyperParams hp;
  hp.epsilon_decay = 0.99;
  hp.epsilon_min = 0.05;
  CHECK(decay_epsilon(1.0, hp) == doctest::Approx(0.99));
  CHECK(decay_epsilon(0.05, hp) == 0.05);
  double e = 1.0;
  for (int n = 1; n <= 400; ++n) {
    e = decay_epsilon(e, hp);
    CHECK(e == doctest::Approx(std::max(hp.epsilon_min, std::pow(0.99, n))).epsilon(1e-9));
  }
}

TEST_CASE("hyperparameter validation") {
  HyperParams hp;
  CHECK_NOTHROW(validate(hp));
  hp.gamma = 1.0;
  CHECK_THROWS_AS(validate(hp), InvalidParameter);
  hp = {};
  hp.alpha = 0.0;
  CHECK_THROWS_AS(validate(hp), InvalidParameter);
  hp = {};
  hp.epsilon_min = 0.5;
  hp.epsilon0 = 0.1;
  CHECK_THROWS_AS(validate(hp), InvalidParameter);
}
