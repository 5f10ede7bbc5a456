#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "kdnsim/rng.hpp"

namespace kdnsim {

/// Per-UE observation fed to the agent.
struct TelemetrySample {
  int ue_id = 0;
  double packet_loss = 0.0;
  double latency_ms = 0.0;
  double throughput_bps = 0.0;
  double speed_mps = 0.0;
  double distance_to_serving_m = 0.0;
  double serving_load_ratio = 0.0;

  bool operator==(const TelemetrySample&) const = default;
};

inline constexpr std::size_t kFeatureCount = 6;

/// Feature order used for discretization, persistence and the wire protocol.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "packet_loss", "latency_ms", "throughput_bps",
    "speed_mps",   "distance_m", "load_ratio"};

std::array<double, kFeatureCount> feature_vector(const TelemetrySample& t);

enum class Action : int {
  NoOp = 0,
  Handover1 = 1,
  Handover2 = 2,
  Handover3 = 3,
  PowerUp = 4,
  PowerDown = 5,
};

inline constexpr int kActionCount = 6;
inline constexpr std::array<std::string_view, kActionCount> kActionNames{
    "noop", "handover_1", "handover_2", "handover_3", "power_up", "power_down"};

constexpr int ordinal(Action a) { return static_cast<int>(a); }
Action action_from_ordinal(int ordinal);

/// 1-based handover rank, or 0 when the action is not a handover.
constexpr int handover_rank(Action a) {
  const int o = ordinal(a);
  return o >= 1 && o <= 3 ? o : 0;
}

/// Boundary lists per feature, in kFeatureNames order. A feature with k
/// boundaries has k + 1 bins.
struct StateBins {
  std::array<std::vector<double>, kFeatureCount> boundaries{{
      {0.01, 0.05},
      {10.0, 50.0},
      {0.1e9, 1e9},
      {5.0},
      {50.0, 150.0},
      {0.5, 0.9},
  }};

  std::size_t bin_count(std::size_t feature) const { return boundaries[feature].size() + 1; }
  std::size_t state_count() const;
  bool operator==(const StateBins&) const = default;
};

void validate(const StateBins& bins);

using StateIndex = std::size_t;

/// Mixed-radix state index, packet loss most significant.
StateIndex discretize_state(const TelemetrySample& t, const StateBins& bins);

/// Per-feature bin numbers for a sample.
std::array<std::size_t, kFeatureCount> feature_bins(const TelemetrySample& t,
                                                    const StateBins& bins);
StateIndex combine_bins(std::span<const std::size_t> bin_ids, const StateBins& bins);

struct HyperParams {
  double alpha = 0.2;
  double gamma = 0.5;
  double epsilon0 = 1.0;
  double epsilon_min = 0.05;
  double epsilon_decay = 0.85;
  int episodes = 12;
  int ticks_per_episode = 2000;

  bool operator==(const HyperParams&) const = default;
};

void validate(const HyperParams& hp);

struct RewardConfig {
  double latency_sla_ms = 10.0;
  double loss_sla = 0.01;
  double throughput_sla_bps = 0.5e9;
  double imbalance_weight = 1.0;
};

void validate(const RewardConfig& rc);

/// Dense state-action table. Shape is fixed at construction.
class QTable {
 public:
  using Values = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Counts = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  QTable(std::size_t states, std::size_t actions);

  std::size_t states() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t actions() const { return static_cast<std::size_t>(values_.cols()); }

  double value(StateIndex s, std::size_t a) const { return values_(index(s), check_action(a)); }
  void set_value(StateIndex s, std::size_t a, double v) { values_(index(s), check_action(a)) = v; }
  std::uint64_t visits(StateIndex s, std::size_t a) const {
    return counts_(index(s), check_action(a));
  }

  auto row(StateIndex s) const { return values_.row(index(s)); }
  double max_value(StateIndex s) const { return row(s).maxCoeff(); }

  /// Argmax over row s, lowest action ordinal on ties.
  std::size_t greedy_action(StateIndex s) const;

  const Values& values() const { return values_; }
  Values& values() { return values_; }
  const Counts& visit_counts() const { return counts_; }
  Counts& visit_counts() { return counts_; }

  bool operator==(const QTable& other) const {
    return values_ == other.values_ && counts_ == other.counts_;
  }

 private:
  Eigen::Index index(StateIndex s) const;
  Eigen::Index check_action(std::size_t a) const;

  Values values_;
  Counts counts_;
};

/// Epsilon-greedy action ordinal over the row of s. Draws exactly one
/// uniform number, plus one more index draw when exploring.
std::size_t select_action_ordinal(const QTable& q, StateIndex s, double epsilon, Rng& rng);
Action select_action(const QTable& q, StateIndex s, double epsilon, Rng& rng);

/// One temporal-difference step:
/// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)).
void q_update(QTable& q, StateIndex s, std::size_t a, double reward, StateIndex s_next,
              const HyperParams& hp);
/// Terminal transition: the bootstrap term is dropped.
void q_update_terminal(QTable& q, StateIndex s, std::size_t a, double reward,
                       const HyperParams& hp);

/// Jain's index (sum x)^2 / (n * sum x^2); 1 when every entry is zero.
double jain_fairness(std::span<const double> loads);

/// +1/-1 per SLA term minus imbalance_weight * (1 - Jain(loads)).
double compute_reward(const TelemetrySample& t, std::span<const double> load_ratios,
                      const RewardConfig& rc);

double decay_epsilon(double epsilon, const HyperParams& hp);

/// Metadata written alongside a persisted table.
struct QTableHeader {
  StateBins bins;
  HyperParams hyper;
};

inline constexpr std::string_view kQTableMagic = "KDNSIM-QTABLE";
inline constexpr int kQTableVersion = 1;

void save_qtable(const QTable& q, const QTableHeader& header, std::ostream& out);
void save_qtable(const QTable& q, const QTableHeader& header, const std::filesystem::path& path);

struct LoadedQTable {
  QTable table;
  QTableHeader header;
};

/// Parses a persisted table. Throws ParseError on malformed or truncated
/// input and IncompatibleTable when the header disagrees with itself or with
/// `expected_bins`.
LoadedQTable load_qtable(std::istream& in);
LoadedQTable load_qtable(const std::filesystem::path& path);
LoadedQTable load_qtable(const std::filesystem::path& path, const StateBins& expected_bins);

}  // namespace kdnsim
