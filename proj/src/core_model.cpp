#include "kdnsim/core_model.hpp"

#include <algorithm>
#include <cmath>

#include "kdnsim/errors.hpp"

namespace kdnsim {

std::string to_string(StationKind kind) {
  return kind == StationKind::MacroBS ? "macro" : "ap";
}

int BaseStation::power_level_index() const {
  auto it = std::find(power_levels_dbm.begin(), power_levels_dbm.end(), tx_power_dbm);
  return it == power_levels_dbm.end() ? -1
                                      : static_cast<int>(it - power_levels_dbm.begin());
}

void validate(const BaseStation& bs) {
  auto fail = [&](const std::string& what) {
    throw InvalidParameter("station " + std::to_string(bs.id) + ": " + what);
  };
  if (!(bs.bandwidth_hz > 0.0) || !std::isfinite(bs.bandwidth_hz)) fail("bandwidth must be > 0");
  if (!(bs.carrier_frequency_hz > 0.0) || !std::isfinite(bs.carrier_frequency_hz))
    fail("carrier_frequency must be > 0");
  if (!(bs.base_latency_ms >= 0.0)) fail("base_latency must be >= 0");
  if (bs.capacity_ue < 1) fail("capacity_ue must be >= 1");
  if (bs.power_levels_dbm.empty()) fail("power_levels must not be empty");
  if (!std::is_sorted(bs.power_levels_dbm.begin(), bs.power_levels_dbm.end()) ||
      std::adjacent_find(bs.power_levels_dbm.begin(), bs.power_levels_dbm.end()) !=
          bs.power_levels_dbm.end())
    fail("power_levels must be strictly increasing");
  if (bs.power_level_index() < 0) fail("tx_power must be one of power_levels");
}

void validate(const RadioConstants& rc) {
  auto fail = [](const std::string& what) { throw InvalidParameter("radio: " + what); };
  if (!(rc.thz_absorption_db_per_m >= 0.0)) fail("absorption must be >= 0");
  if (!(rc.d_min_m > 0.0)) fail("d_min must be > 0");
  if (!(rc.u_cap > 0.0 && rc.u_cap < 1.0)) fail("u_cap must be in (0, 1)");
  if (!(rc.eps_u > 0.0)) fail("eps_u must be > 0");
  if (!(rc.k_q >= 0.0 && rc.k_over >= 0.0 && rc.k_rf >= 0.0)) fail("gains must be >= 0");
  if (!(rc.s_w_db > 0.0)) fail("s_w must be > 0");
  if (std::isnan(rc.noise_dbm)) fail("noise must not be NaN");
}

std::vector<double> NetworkState::load_ratios() const {
  std::vector<double> out(stations.size());
  for (std::size_t b = 0; b < stations.size(); ++b) out[b] = load_ratio(static_cast<int>(b));
  return out;
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

double path_loss(double distance_m, double frequency_hz, double absorption_db_per_m,
                 double d_min_m) {
  if (!std::isfinite(frequency_hz) || frequency_hz <= 0.0)
    throw InvalidParameter("path_loss: frequency must be finite and > 0");
  if (!std::isfinite(distance_m) || distance_m < 0.0)
    throw InvalidParameter("path_loss: distance must be finite and >= 0");
  if (!std::isfinite(absorption_db_per_m) || absorption_db_per_m < 0.0)
    throw InvalidParameter("path_loss: absorption must be finite and >= 0");
  const double d = std::max(distance_m, d_min_m);
  return 20.0 * std::log10(d) + 20.0 * std::log10(frequency_hz) - 147.55 +
         absorption_db_per_m * d;
}

double received_power_dbm(const BaseStation& bs, const Vec2& at, const RadioConstants& rc) {
  const double d = (bs.position - at).norm();
  return bs.tx_power_dbm -
         path_loss(d, bs.carrier_frequency_hz, rc.absorption_for(bs.carrier_frequency_hz),
                   rc.d_min_m);
}

namespace {

double sinr_from_powers(double signal_mw, double interference_mw, double noise_mw,
                        double cap_db) {
  const double denom = interference_mw + noise_mw;
  if (denom <= 0.0) return signal_mw > 0.0 ? cap_db : kMinusInfinity;
  if (signal_mw <= 0.0) return kMinusInfinity;
  return std::min(linear_to_db(signal_mw / denom), cap_db);
}

}  // namespace

double sinr(const UserEquipment& ue, const BaseStation& serving,
            std::span<const BaseStation> interferers, double noise_dbm,
            const RadioConstants& rc) {
  const double signal = dbm_to_mw(received_power_dbm(serving, ue.position, rc));
  double interference = 0.0;
  for (const auto& bs : interferers) {
    if (bs.id == serving.id)
      throw InvalidParameter("sinr: serving station listed as interferer");
    if (bs.carrier_frequency_hz != serving.carrier_frequency_hz) continue;
    interference += dbm_to_mw(received_power_dbm(bs, ue.position, rc));
  }
  return sinr_from_powers(signal, interference, dbm_to_mw(noise_dbm), rc.sinr_cap_db);
}

double sinr(const UserEquipment& ue, const BaseStation& serving,
            std::span<const BaseStation> interferers, const RadioConstants& rc) {
  return sinr(ue, serving, interferers, rc.noise_dbm, rc);
}

double ue_throughput(double sinr_db, double bandwidth_hz, int load) {
  if (load < 1) throw InvalidParameter("ue_throughput: load must be >= 1");
  if (sinr_db == kMinusInfinity) return 0.0;
  return bandwidth_hz / load * std::log2(1.0 + db_to_linear(sinr_db));
}

double ue_latency(const BaseStation& bs, double utilization, const RadioConstants& rc) {
  const double u = std::max(utilization, 0.0);
  const double headroom = std::max(rc.eps_u, 1.0 - std::min(u, rc.u_cap));
  return bs.base_latency_ms * (1.0 + rc.k_q * u / headroom);
}

double packet_loss(double utilization, double sinr_db, const RadioConstants& rc) {
  const double overload = std::max(0.0, utilization - 1.0) * rc.k_over;
  const double rf = rc.k_rf / (1.0 + std::exp(-(rc.sinr_floor_db - sinr_db) / rc.s_w_db));
  return std::clamp(overload + rf, 0.0, 1.0);
}

void refresh_metrics_in_place(NetworkState& state, const RadioConstants& rc) {
  const std::size_t n_bs = state.stations.size();
  state.loads.assign(n_bs, 0);
  for (const auto& ue : state.ues) {
    if (ue.serving_bs < 0 || static_cast<std::size_t>(ue.serving_bs) >= n_bs)
      throw IntegrityError("UE " + std::to_string(ue.id) + " references unknown station " +
                           std::to_string(ue.serving_bs));
    ++state.loads[ue.serving_bs];
  }

  std::vector<double> absorption(n_bs);
  for (std::size_t b = 0; b < n_bs; ++b)
    absorption[b] = rc.absorption_for(state.stations[b].carrier_frequency_hz);
  const double noise_mw = dbm_to_mw(rc.noise_dbm);

  state.links.resize(state.ues.size());
  std::vector<double> rx_mw(n_bs);
  std::vector<double> loss_db(n_bs);
  for (std::size_t i = 0; i < state.ues.size(); ++i) {
    const auto& ue = state.ues[i];
    for (std::size_t b = 0; b < n_bs; ++b) {
      const auto& bs = state.stations[b];
      loss_db[b] = path_loss((bs.position - ue.position).norm(), bs.carrier_frequency_hz,
                             absorption[b], rc.d_min_m);
      rx_mw[b] = dbm_to_mw(bs.tx_power_dbm - loss_db[b]);
    }
    const auto& serving = state.stations[ue.serving_bs];
    double interference = 0.0;
    for (std::size_t b = 0; b < n_bs; ++b) {
      if (static_cast<int>(b) == ue.serving_bs) continue;
      if (state.stations[b].carrier_frequency_hz == serving.carrier_frequency_hz)
        interference += rx_mw[b];
    }

    const int load = state.loads[ue.serving_bs];
    const double utilization = static_cast<double>(load) / serving.capacity_ue;
    LinkMetrics& link = state.links[i];
    link.path_loss_db = loss_db[ue.serving_bs];
    link.sinr_db = sinr_from_powers(rx_mw[ue.serving_bs], interference, noise_mw, rc.sinr_cap_db);
    link.shannon_bps = ue_throughput(link.sinr_db, serving.bandwidth_hz, load);
    link.latency_ms = ue_latency(serving, utilization, rc);
    link.packet_loss = packet_loss(utilization, link.sinr_db, rc);
    link.throughput_bps = std::min(link.shannon_bps, ue.demand_bps) * (1.0 - link.packet_loss);
  }
}

NetworkState refresh_metrics(NetworkState state, const RadioConstants& rc) {
  refresh_metrics_in_place(state, rc);
  return state;
}

NetworkKpis aggregate_kpis(const NetworkState& state) {
  NetworkKpis k;
  if (state.links.empty()) return k;
  for (const auto& l : state.links) {
    k.aggregate_throughput_bps += l.throughput_bps;
    k.mean_latency_ms += l.latency_ms;
    k.mean_packet_loss += l.packet_loss;
  }
  const auto n = static_cast<double>(state.links.size());
  k.mean_latency_ms /= n;
  k.mean_packet_loss /= n;
  return k;
}

}  // namespace kdnsim
