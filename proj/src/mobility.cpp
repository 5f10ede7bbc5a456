#include "kdnsim/mobility.hpp"

#include <algorithm>
#include <cmath>

#include "kdnsim/errors.hpp"

namespace kdnsim {

void validate(const MobilityConfig& cfg) {
  auto fail = [](const std::string& what) { throw InvalidParameter("mobility: " + what); };
  if (!(cfg.area.width_m > 0.0 && cfg.area.height_m > 0.0)) fail("area must have positive extent");
  if (!(cfg.speed_min_mps >= 0.0 && cfg.speed_min_mps <= cfg.speed_max_mps))
    fail("speed range must satisfy 0 <= v_min <= v_max");
  if (!(cfg.pause_max_s >= 0.0)) fail("pause_max must be >= 0");
  if (!(cfg.tick_duration_s > 0.0)) fail("tick_duration must be > 0");
}

Vec2 random_point(const Area& area, Rng& rng) {
  const double x = rng.uniform(0.0, area.width_m);
  const double y = rng.uniform(0.0, area.height_m);
  return {x, y};
}

namespace {

void draw_leg(WaypointTrack& track, const MobilityConfig& cfg, Rng& rng) {
  track.waypoint = random_point(cfg.area, rng);
  track.speed_mps = rng.uniform(cfg.speed_min_mps, cfg.speed_max_mps);
  track.pause_left_s = 0.0;
}

}  // namespace

void init_mobility(UserEquipment& ue, const MobilityConfig& cfg, Rng& rng) {
  ue.position = random_point(cfg.area, rng);
  ue.velocity = Vec2::Zero();
  draw_leg(ue.track, cfg, rng);
}

void step_mobility_in_place(UserEquipment& ue, const MobilityConfig& cfg, Rng& rng) {
  const double dt = cfg.tick_duration_s;
  auto& track = ue.track;

  if (track.pause_left_s > 0.0) {
    ue.velocity = Vec2::Zero();
    track.pause_left_s -= dt;
    if (track.pause_left_s <= 0.0) draw_leg(track, cfg, rng);
    return;
  }

  const Vec2 to_go = track.waypoint - ue.position;
  const double dist = to_go.norm();
  const double reach = track.speed_mps * dt;
  if (dist <= reach) {
    ue.velocity = to_go / dt;
    ue.position = track.waypoint;
    track.pause_left_s = rng.uniform(0.0, cfg.pause_max_s);
    if (track.pause_left_s <= 0.0) draw_leg(track, cfg, rng);
  } else {
    ue.velocity = to_go * (track.speed_mps / dist);
    ue.position += ue.velocity * dt;
  }
  // Both endpoints lie in the area, so this only absorbs rounding.
  ue.position.x() = std::clamp(ue.position.x(), 0.0, cfg.area.width_m);
  ue.position.y() = std::clamp(ue.position.y(), 0.0, cfg.area.height_m);
}

UserEquipment step_mobility(UserEquipment ue, const MobilityConfig& cfg, Rng& rng) {
  step_mobility_in_place(ue, cfg, rng);
  return ue;
}

double observed_speed(const Vec2& prev_position, const Vec2& new_position,
                      double tick_duration_s) {
  if (!(tick_duration_s > 0.0)) throw InvalidParameter("observed_speed: tick_duration must be > 0");
  return (new_position - prev_position).norm() / tick_duration_s;
}

}  // namespace kdnsim
