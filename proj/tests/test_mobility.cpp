#include <doctest.h>

#include "kdnsim/mobility.hpp"

using namespace kdnsim;

TEST_CASE("observed_speed") {
  CHECK(observed_speed({1, 1}, {1, 1}, 0.1) == 0.0);
  CHECK(observed_speed({0, 0}, {3, 4}, 1.0) == 5.0);
  CHECK(observed_speed({0, 0}, {3, 4}, 0.5) == 10.0);
}

TEST_CASE("static UEs never move") {
  MobilityConfig cfg;
  cfg.speed_min_mps = 0.0;
  cfg.speed_max_mps = 0.0;
  Rng rng(1);
  UserEquipment ue;
  init_mobility(ue, cfg, rng);
  const Vec2 start = ue.position;
  for (int t = 0; t < 1000; ++t) {
    ue = step_mobility(ue, cfg, rng);
    CHECK(ue.position == start);
  }
}

TEST_CASE("travel far from the waypoint covers v * dt per tick") {
  MobilityConfig cfg;
  cfg.tick_duration_s = 0.1;
  Rng rng(2);
  UserEquipment ue;
  ue.position = {0.0, 0.0};
  ue.track.waypoint = {400.0, 300.0};
  ue.track.speed_mps = 12.5;
  for (int t = 0; t < 50; ++t) {
    const Vec2 before = ue.position;
    step_mobility_in_place(ue, cfg, rng);
    CHECK(std::abs((ue.position - before).norm() - 12.5 * 0.1) < 1e-9);
    CHECK(std::abs(observed_speed(before, ue.position, cfg.tick_duration_s) - 12.5) < 1e-9);
  }
}

TEST_CASE("arrival lands on the waypoint, then pauses") {
  MobilityConfig cfg;
  cfg.pause_max_s = 2.0;
  Rng rng(3);
  UserEquipment ue;
  ue.position = {10.0, 10.0};
  ue.track.waypoint = {10.5, 10.0};
  ue.track.speed_mps = 10.0;  // one tick reaches 1 m
  step_mobility_in_place(ue, cfg, rng);
  CHECK(ue.position == Vec2(10.5, 10.0));
  if (ue.track.pause_left_s > 0.0) {
    const Vec2 hold = ue.position;
    step_mobility_in_place(ue, cfg, rng);
    CHECK(ue.position == hold);
    CHECK(ue.velocity == Vec2::Zero());
  }
}

TEST_CASE("positions stay inside the area for every seed") {
  MobilityConfig cfg;
  cfg.area = {120.0, 80.0};
  cfg.speed_max_mps = 30.0;
  cfg.pause_max_s = 0.5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(seed, Stream::Mobility));
    UserEquipment ue;
    init_mobility(ue, cfg, rng);
    bool inside = true;
    for (int t = 0; t < 100000; ++t) {
      step_mobility_in_place(ue, cfg, rng);
      inside = inside && cfg.area.contains(ue.position);
    }
    CHECK(inside);
  }
}

TEST_CASE("same seed gives a bitwise identical trajectory") {
  MobilityConfig cfg;
  Rng a(77), b(77);
  UserEquipment ua, ub;
  init_mobility(ua, cfg, a);
  init_mobility(ub, cfg, b);
  for (int t = 0; t < 5000; ++t) {
    step_mobility_in_place(ua, cfg, a);
    step_mobility_in_place(ub, cfg, b);
    REQUIRE(ua.position == ub.position);
  }
}

TEST_CASE("mobility config validation") {
  MobilityConfig cfg;
  cfg.speed_min_mps = 5.0;
  cfg.speed_max_mps = 1.0;
  CHECK_THROWS(validate(cfg));
  cfg = {};
  cfg.tick_duration_s = 0.0;
  CHECK_THROWS(validate(cfg));
  cfg = {};
  cfg.area.width_m = 0.0;
  CHECK_THROWS(validate(cfg));
}
