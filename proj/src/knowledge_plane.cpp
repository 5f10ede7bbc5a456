#include "kdnsim/knowledge_plane.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kdnsim/errors.hpp"

namespace kdnsim {

std::array<double, kFeatureCount> feature_vector(const TelemetrySample& t) {
  return {t.packet_loss, t.latency_ms, t.throughput_bps,
          t.speed_mps,   t.distance_to_serving_m, t.serving_load_ratio};
}

Action action_from_ordinal(int ordinal) {
  if (ordinal < 0 || ordinal >= kActionCount)
    throw InvalidParameter("action ordinal out of range: " + std::to_string(ordinal));
  return static_cast<Action>(ordinal);
}

std::size_t StateBins::state_count() const {
  std::size_t s = 1;
  for (std::size_t f = 0; f < kFeatureCount; ++f) s *= bin_count(f);
  return s;
}

void validate(const StateBins& bins) {
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const auto& b = bins.boundaries[f];
    for (double x : b)
      if (!std::isfinite(x))
        throw InvalidParameter("bins." + std::string(kFeatureNames[f]) + ": boundary not finite");
    for (std::size_t i = 1; i < b.size(); ++i)
      if (!(b[i] > b[i - 1]))
        throw InvalidParameter("bins." + std::string(kFeatureNames[f]) +
                               ": boundaries must be strictly increasing");
  }
}

std::array<std::size_t, kFeatureCount> feature_bins(const TelemetrySample& t,
                                                    const StateBins& bins) {
  const auto x = feature_vector(t);
  std::array<std::size_t, kFeatureCount> out{};
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (std::isnan(x[f]))
      throw InvalidTelemetry("telemetry feature " + std::string(kFeatureNames[f]) + " is NaN");
    const auto& b = bins.boundaries[f];
    out[f] = static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), x[f]) - b.begin());
  }
  return out;
}

StateIndex combine_bins(std::span<const std::size_t> bin_ids, const StateBins& bins) {
  if (bin_ids.size() != kFeatureCount) throw InvalidParameter("combine_bins: wrong arity");
  StateIndex index = 0;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (bin_ids[f] >= bins.bin_count(f)) throw InvalidParameter("combine_bins: bin out of range");
    index = index * bins.bin_count(f) + bin_ids[f];
  }
  return index;
}

StateIndex discretize_state(const TelemetrySample& t, const StateBins& bins) {
  const auto ids = feature_bins(t, bins);
  return combine_bins(ids, bins);
}

void validate(const HyperParams& hp) {
  auto fail = [](const std::string& what) { throw InvalidParameter("learning: " + what); };
  if (!(hp.alpha > 0.0 && hp.alpha <= 1.0)) fail("alpha must be in (0, 1]");
  if (!(hp.gamma >= 0.0 && hp.gamma < 1.0)) fail("gamma must be in [0, 1)");
  if (!(hp.epsilon0 >= 0.0 && hp.epsilon0 <= 1.0)) fail("epsilon0 must be in [0, 1]");
  if (!(hp.epsilon_min >= 0.0 && hp.epsilon_min <= hp.epsilon0))
    fail("epsilon_min must be in [0, epsilon0]");
  if (!(hp.epsilon_decay > 0.0 && hp.epsilon_decay <= 1.0)) fail("epsilon_decay must be in (0, 1]");
  if (hp.episodes < 0) fail("episodes must be >= 0");
  if (hp.ticks_per_episode < 0) fail("ticks_per_episode must be >= 0");
}

void validate(const RewardConfig& rc) {
  auto fail = [](const std::string& what) { throw InvalidParameter("reward: " + what); };
  if (!(rc.latency_sla_ms > 0.0)) fail("latency_sla must be > 0");
  if (!(rc.loss_sla > 0.0)) fail("loss_sla must be > 0");
  if (!(rc.throughput_sla_bps > 0.0)) fail("throughput_sla must be > 0");
  if (!(rc.imbalance_weight >= 0.0)) fail("imbalance_weight must be >= 0");
}

QTable::QTable(std::size_t states, std::size_t actions)
    : values_(Values::Zero(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(actions))),
      counts_(Counts::Zero(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(actions))) {
  if (states == 0 || actions == 0) throw InvalidParameter("QTable: dimensions must be positive");
}

Eigen::Index QTable::index(StateIndex s) const {
  if (s >= states()) throw InvalidParameter("state index out of range: " + std::to_string(s));
  return static_cast<Eigen::Index>(s);
}

Eigen::Index QTable::check_action(std::size_t a) const {
  if (a >= actions()) throw InvalidParameter("action index out of range: " + std::to_string(a));
  return static_cast<Eigen::Index>(a);
}

std::size_t QTable::greedy_action(StateIndex s) const {
  const auto r = row(s);
  std::size_t best = 0;
  for (Eigen::Index a = 1; a < r.size(); ++a)
    if (r(a) > r(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(a);
  return best;
}

std::size_t select_action_ordinal(const QTable& q, StateIndex s, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidParameter("epsilon must be in [0, 1]");
  if (rng.uniform01() < epsilon) return rng.index(q.actions());
  return q.greedy_action(s);
}

Action select_action(const QTable& q, StateIndex s, double epsilon, Rng& rng) {
  return action_from_ordinal(static_cast<int>(select_action_ordinal(q, s, epsilon, rng)));
}

namespace {

void td_step(QTable& q, StateIndex s, std::size_t a, double target, double alpha) {
  if (!std::isfinite(target)) throw InvalidParameter("q_update: non-finite target");
  const double old = q.value(s, a);
  q.set_value(s, a, old + alpha * (target - old));
  ++q.visit_counts()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
}

}  // namespace

void q_update(QTable& q, StateIndex s, std::size_t a, double reward, StateIndex s_next,
              const HyperParams& hp) {
  td_step(q, s, a, reward + hp.gamma * q.max_value(s_next), hp.alpha);
}

void q_update_terminal(QTable& q, StateIndex s, std::size_t a, double reward,
                       const HyperParams& hp) {
  td_step(q, s, a, reward, hp.alpha);
}

double jain_fairness(std::span<const double> loads) {
  if (loads.empty()) return 1.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double x : loads) {
    sum += x;
    sum_sq += x * x;
  }
  if (sum_sq == 0.0) return 1.0;
  return sum * sum / (static_cast<double>(loads.size()) * sum_sq);
}

double compute_reward(const TelemetrySample& t, std::span<const double> load_ratios,
                      const RewardConfig& rc) {
  auto sat = [](bool ok) { return ok ? 1.0 : -1.0; };
  return sat(t.latency_ms <= rc.latency_sla_ms) + sat(t.packet_loss <= rc.loss_sla) +
         sat(t.throughput_bps >= rc.throughput_sla_bps) -
         rc.imbalance_weight * (1.0 - jain_fairness(load_ratios));
}

double decay_epsilon(double epsilon, const HyperParams& hp) {
  return std::max(hp.epsilon_min, epsilon * hp.epsilon_decay);
}

}  // namespace kdnsim
