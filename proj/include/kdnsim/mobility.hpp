#pragma once

#include "kdnsim/core_model.hpp"
#include "kdnsim/rng.hpp"

namespace kdnsim {

struct Area {
  double width_m = 500.0;
  double height_m = 500.0;

  bool contains(const Vec2& p) const {
    return p.x() >= 0.0 && p.x() <= width_m && p.y() >= 0.0 && p.y() <= height_m;
  }
};

struct MobilityConfig {
  Area area;
  double speed_min_mps = 0.0;
  double speed_max_mps = 20.0;
  double pause_max_s = 2.0;
  double tick_duration_s = 0.1;
};

void validate(const MobilityConfig& cfg);

Vec2 random_point(const Area& area, Rng& rng);

/// Places a UE uniformly in the area and draws its first waypoint and speed.
void init_mobility(UserEquipment& ue, const MobilityConfig& cfg, Rng& rng);

/// Advances one tick of random-waypoint motion. The UE travels toward its
/// waypoint at its current speed; once within one tick's travel it lands on
/// the waypoint, pauses for U[0, pause_max] and then draws a fresh waypoint
/// and speed.
UserEquipment step_mobility(UserEquipment ue, const MobilityConfig& cfg, Rng& rng);
void step_mobility_in_place(UserEquipment& ue, const MobilityConfig& cfg, Rng& rng);

/// Euclidean displacement over tick_duration.
double observed_speed(const Vec2& prev_position, const Vec2& new_position,
                      double tick_duration_s);

}  // namespace kdnsim
