#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kdnsim {

using Vec2 = Eigen::Vector2d;

enum class StationKind { MacroBS, AccessPoint };

std::string to_string(StationKind kind);

struct BaseStation {
  int id = 0;
  StationKind kind = StationKind::MacroBS;
  Vec2 position = Vec2::Zero();
  double carrier_frequency_hz = 3.5e9;
  double bandwidth_hz = 100e6;
  double tx_power_dbm = 36.0;
  std::vector<double> power_levels_dbm{30.0, 36.0, 40.0, 43.0};
  double base_latency_ms = 2.0;
  int capacity_ue = 64;

  /// Position of tx_power_dbm inside power_levels_dbm, or -1.
  int power_level_index() const;
};

/// Throws InvalidParameter when a station violates its invariants.
void validate(const BaseStation& bs);

/// Random-waypoint bookkeeping carried by each UE.
struct WaypointTrack {
  Vec2 waypoint = Vec2::Zero();
  double speed_mps = 0.0;
  double pause_left_s = 0.0;
};

struct UserEquipment {
  int id = 0;
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  int serving_bs = 0;
  double demand_bps = 1e9;
  WaypointTrack track;
};

struct LinkMetrics {
  double path_loss_db = 0.0;
  double sinr_db = 0.0;
  /// Shannon share before demand capping and loss.
  double shannon_bps = 0.0;
  /// Delivered rate: min(shannon share, demand) * (1 - packet_loss).
  double throughput_bps = 0.0;
  double latency_ms = 0.0;
  double packet_loss = 0.0;

  bool operator==(const LinkMetrics&) const = default;
};

/// Constants of the flow-level radio, latency and loss models.
struct RadioConstants {
  double noise_dbm = -100.0;
  /// Molecular absorption applied to carriers at or above thz_threshold_hz.
  double thz_absorption_db_per_m = 0.5;
  double thz_threshold_hz = 100e9;
  double d_min_m = 1.0;
  double sinr_cap_db = 60.0;
  double k_q = 1.0;
  double u_cap = 0.95;
  double eps_u = 0.05;
  double k_over = 0.4;
  double k_rf = 0.1;
  double sinr_floor_db = 3.0;
  double s_w_db = 2.0;

  double absorption_for(double carrier_hz) const {
    return carrier_hz >= thz_threshold_hz ? thz_absorption_db_per_m : 0.0;
  }
};

void validate(const RadioConstants& rc);

/// Live network snapshot. Station and UE ids equal their vector index;
/// links[i] belongs to ues[i] and loads[b] to stations[b].
struct NetworkState {
  std::int64_t tick = 0;
  std::vector<BaseStation> stations;
  std::vector<UserEquipment> ues;
  std::vector<LinkMetrics> links;
  std::vector<int> loads;

  double load_ratio(int bs) const {
    return static_cast<double>(loads.at(bs)) / stations.at(bs).capacity_ue;
  }
  std::vector<double> load_ratios() const;
};

inline constexpr double kMinusInfinity = -std::numeric_limits<double>::infinity();

double dbm_to_mw(double dbm);
double db_to_linear(double db);
double linear_to_db(double linear);

/// Free-space path loss plus a linear absorption term, in dB. Distances
/// below d_min are clamped to d_min.
double path_loss(double distance_m, double frequency_hz, double absorption_db_per_m,
                 double d_min_m = 1.0);

/// Received power of `bs` at `at`, in dBm.
double received_power_dbm(const BaseStation& bs, const Vec2& at, const RadioConstants& rc);

/// SINR of `ue` served by `serving`. Interferers on other carriers are ignored.
/// Capped at rc.sinr_cap_db.
double sinr(const UserEquipment& ue, const BaseStation& serving,
            std::span<const BaseStation> interferers, double noise_dbm,
            const RadioConstants& rc);
double sinr(const UserEquipment& ue, const BaseStation& serving,
            std::span<const BaseStation> interferers, const RadioConstants& rc);

/// Equal-share Shannon rate (bandwidth / load) * log2(1 + sinr).
double ue_throughput(double sinr_db, double bandwidth_hz, int load);

/// Bounded M/M/1-style delay curve in ms.
double ue_latency(const BaseStation& bs, double utilization, const RadioConstants& rc);

/// Overload plus radio-quality loss fraction, clamped to [0, 1].
double packet_loss(double utilization, double sinr_db, const RadioConstants& rc);

/// Recomputes loads and every UE's LinkMetrics in place.
void refresh_metrics_in_place(NetworkState& state, const RadioConstants& rc);

/// Pure counterpart of refresh_metrics_in_place.
NetworkState refresh_metrics(NetworkState state, const RadioConstants& rc);

/// Per-tick aggregate KPIs of a refreshed state.
struct NetworkKpis {
  double aggregate_throughput_bps = 0.0;
  double mean_latency_ms = 0.0;
  double mean_packet_loss = 0.0;
};

NetworkKpis aggregate_kpis(const NetworkState& state);

}  // namespace kdnsim
