#pragma once

// Seeded synthetic scenario generator. Every scenario index owns a SplitMix64
// sub-stream, so output depends only on (spec, index).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vlad/oracle.hpp"
#include "vlad/rng.hpp"
#include "vlad/scene.hpp"

namespace vlad {

enum class Suite { Cruise, Turns, HazardVru, SymmetricFork, Mixed };

inline std::string_view to_string(Suite s) noexcept {
  switch (s) {
    case Suite::Cruise: return "CRUISE";
    case Suite::Turns: return "TURNS";
    case Suite::HazardVru: return "HAZARD_VRU";
    case Suite::SymmetricFork: return "SYMMETRIC_FORK";
    case Suite::Mixed: return "MIXED";
  }
  return "?";
}

inline std::optional<Suite> parse_suite(std::string_view s) noexcept {
  for (auto v : {Suite::Cruise, Suite::Turns, Suite::HazardVru, Suite::SymmetricFork, Suite::Mixed})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct GenSpec {
  std::size_t n_scenarios = 100;
  std::uint64_t seed = 0;
  Suite suite = Suite::Mixed;
  double agent_density = 0.5;
  double speed_min = 2.0;
  double speed_max = 10.0;

  void validate() const {
    if (n_scenarios == 0) throw ConfigError("gen.n_scenarios: must be positive");
    if (!(agent_density >= 0.0 && agent_density <= 1.0)) throw ConfigError("gen.agent_density: must be in [0, 1]");
    if (!(speed_min >= 0.0 && speed_min <= speed_max) || !std::isfinite(speed_max))
      throw ConfigError("gen.speed_range: need 0 <= min <= max");
  }
};

namespace gen {

inline constexpr double kLaneWidth = 3.5;
inline constexpr double kTurnRadius = TurnCorridor::kRadius;
/// Ego speeds used when a VRU crosses ahead, and the farthest crossing.
inline constexpr double kHazardSpeedMin = 2.0;
inline constexpr double kHazardSpeedMax = 5.0;
inline constexpr double kMaxCrossingX = 7.5;
/// Gap kept between the crossing line and the stopped ego center.
inline constexpr double kYieldGap = 3.5;

inline double draw_speed(SplitMix64& rng, const GenSpec& spec, double lo_cap, double hi_cap) {
  double lo = std::max(spec.speed_min, lo_cap);
  double hi = std::min(spec.speed_max, hi_cap);
  if (lo > hi) lo = hi = std::clamp(spec.speed_min, lo_cap, hi_cap);
  return rng.uniform(lo, hi);
}

inline std::size_t binomial(SplitMix64& rng, std::size_t trials, double p) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < trials; ++i) n += rng.bernoulli(p);
  return n;
}

inline std::vector<Vec2> constant_velocity(Vec2 p, double heading, double speed) {
  std::vector<Vec2> f;
  for (std::size_t k = 1; k <= kFutureSteps; ++k) {
    const double t = kStepSeconds * static_cast<double>(k);
    f.push_back({p.x + speed * t * std::cos(heading), p.y + speed * t * std::sin(heading)});
  }
  return f;
}

/// Straight-line ego future under constant acceleration, halting at zero speed.
inline Trajectory straight_future(double speed, double accel) {
  Trajectory t;
  const double stop_time = accel < 0.0 ? speed / -accel : std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= kFutureSteps; ++k) {
    const double tk = std::min(kStepSeconds * static_cast<double>(k), stop_time);
    t[k - 1] = {speed * tk + 0.5 * accel * tk * tk, 0.0};
  }
  return t;
}

/// Quarter circle of radius 8 m toward `side` (+1 left) at constant speed,
/// then straight along the exit direction.
inline Trajectory turn_future(double speed, double side) {
  const TurnCorridor c{side};
  const double arc_len = kTurnRadius * std::numbers::pi / 2.0;
  Trajectory t;
  for (std::size_t k = 1; k <= kFutureSteps; ++k) {
    const double s = speed * kStepSeconds * static_cast<double>(k);
    if (s <= arc_len)
      t[k - 1] = c.arc_point(s / kTurnRadius);
    else
      t[k - 1] = c.arc_end() + Vec2{0.0, side * (s - arc_len)};
  }
  return t;
}

inline MapPolyline line(std::int64_t id, PolylineKind kind, Vec2 a, Vec2 step) {
  MapPolyline m{id, kind, {}};
  for (std::size_t i = 0; i < kPolylinePoints; ++i) m.points.push_back(a + static_cast<double>(i) * step);
  return m;
}

inline MapPolyline turn_connector(std::int64_t id, double side) {
  const TurnCorridor c{side};
  MapPolyline m{id, PolylineKind::LaneCenter, {}};
  for (std::size_t i = 0; i < kPolylinePoints; ++i)
    m.points.push_back(c.arc_point(std::numbers::pi / 2.0 * static_cast<double>(i) / (kPolylinePoints - 1)));
  return m;
}

inline std::vector<MapPolyline> straight_road_map() {
  std::vector<MapPolyline> m;
  std::int64_t id = 100;
  for (double y : {0.0, kLaneWidth, -kLaneWidth}) m.push_back(line(id++, PolylineKind::LaneCenter, {-10.0, y}, {15.0, 0.0}));
  for (double y : {-1.5 * kLaneWidth, -0.5 * kLaneWidth, 0.5 * kLaneWidth, 1.5 * kLaneWidth})
    m.push_back(line(id++, PolylineKind::LaneBoundary, {-10.0, y}, {15.0, 0.0}));
  return m;
}

/// Four-way intersection ahead of the ego, with both turn connectors.
inline std::vector<MapPolyline> intersection_map(double crosswalk_x, bool with_straight) {
  std::vector<MapPolyline> m;
  m.push_back(line(100, PolylineKind::LaneCenter, {-30.0, 0.0}, {10.0, 0.0}));
  m.push_back(turn_connector(101, 1.0));
  m.push_back(turn_connector(102, -1.0));
  m.push_back(line(103, PolylineKind::LaneCenter, {kTurnRadius, kTurnRadius}, {0.0, 10.0}));
  m.push_back(line(104, PolylineKind::LaneCenter, {kTurnRadius, -kTurnRadius}, {0.0, -10.0}));
  if (with_straight) m.push_back(line(105, PolylineKind::LaneCenter, {16.0, 0.0}, {10.0, 0.0}));
  m.push_back(line(106, PolylineKind::Crosswalk, {crosswalk_x, -6.0}, {0.0, 4.0}));
  m.push_back(line(107, PolylineKind::LaneBoundary, {-30.0, -0.5 * kLaneWidth}, {10.0, 0.0}));
  return m;
}

inline AgentTrack vehicle(std::int64_t id, Vec2 p, double heading, double speed, SplitMix64& rng) {
  AgentTrack a;
  a.id = id;
  a.kind = AgentKind::Vehicle;
  a.position = p;
  a.heading = normalize_heading(heading);
  a.speed = speed;
  a.length = rng.uniform(4.0, 5.0);
  a.width = rng.uniform(1.8, 2.0);
  a.future = constant_velocity(p, heading, speed);
  return a;
}

inline Scenario base(const std::string& id, std::uint64_t sub_seed) {
  Scenario s;
  s.id = id;
  s.seed = sub_seed;
  s.ego = {{0.0, 0.0}, 0.0, 0.0, 0.0};
  return s;
}

inline Scenario cruise(const GenSpec& spec, SplitMix64& rng, Scenario s) {
  s.ego.speed = draw_speed(rng, spec, 0.0, 1e9);
  s.ego.accel = rng.uniform(-1.0, 0.3);
  s.gt_future = straight_future(s.ego.speed, s.ego.accel);
  s.route_intent = MetaAction::GoStraight;
  s.map = straight_road_map();
  const std::size_t n = binomial(rng, 6, spec.agent_density);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = rng.bernoulli(0.5) ? kLaneWidth : -kLaneWidth;
    const Vec2 p{rng.uniform(-20.0, 40.0), y};
    s.agents.push_back(vehicle(static_cast<std::int64_t>(i + 1), p, 0.0, draw_speed(rng, spec, 0.0, 1e9), rng));
  }
  return s;
}

/// Vehicles well ahead in the adjacent lanes, clear of both turn paths.
inline void add_intersection_traffic(const GenSpec& spec, SplitMix64& rng, Scenario& s, std::size_t trials) {
  const std::size_t n = binomial(rng, trials, spec.agent_density);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = rng.bernoulli(0.5) ? kLaneWidth : -kLaneWidth;
    const Vec2 p{rng.uniform(20.0, 45.0), y};
    s.agents.push_back(vehicle(static_cast<std::int64_t>(s.agents.size() + 1), p, 0.0, draw_speed(rng, spec, 0.0, 1e9), rng));
  }
}

inline Scenario turns(const GenSpec& spec, SplitMix64& rng, Scenario s, bool fork_map) {
  const bool left = rng.bernoulli(0.5);
  s.route_intent = left ? MetaAction::TurnLeft : MetaAction::TurnRight;
  s.ego.speed = draw_speed(rng, spec, 0.0, 8.0);
  s.gt_future = turn_future(s.ego.speed, left ? 1.0 : -1.0);
  s.map = intersection_map(4.0, !fork_map);
  add_intersection_traffic(spec, rng, s, 4);
  return s;
}

/// One pedestrian or cyclist walks laterally across the ego lane and
/// through the intended turn corridor: it sits exactly where a
/// constant-velocity ego would be at one step, and reaches the corridor at
/// another. The ground truth yields: straight braking to a stop short of
/// the crossing while the turn is postponed.
inline Scenario hazard(const GenSpec& spec, SplitMix64& rng, Scenario s) {
  const bool left = rng.bernoulli(0.5);
  const double side = left ? 1.0 : -1.0;
  s.route_intent = left ? MetaAction::TurnLeft : MetaAction::TurnRight;
  const double v = draw_speed(rng, spec, kHazardSpeedMin, kHazardSpeedMax);
  std::size_t cross_step = 1;
  for (std::size_t k = 1; k <= kFutureSteps; ++k)
    if (v * kStepSeconds * static_cast<double>(k) <= kMaxCrossingX) cross_step = k;
  const double t_cross = kStepSeconds * static_cast<double>(cross_step);
  const double x_cross = v * t_cross;

  add_intersection_traffic(spec, rng, s, 3);

  const bool cyclist = rng.bernoulli(0.4);
  double speed = cyclist ? rng.uniform(3.0, 5.0) : rng.uniform(1.0, 1.8);
  const double first_dir = rng.bernoulli(0.5) ? 1.0 : -1.0;
  const TurnCorridor corridor{side};
  AgentTrack vru;
  vru.id = static_cast<std::int64_t>(s.agents.size() + 1);
  vru.kind = cyclist ? AgentKind::Cyclist : AgentKind::Pedestrian;
  vru.length = cyclist ? 1.8 : 0.6;
  vru.width = cyclist ? 0.7 : 0.6;
  bool placed = false;
  for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
    for (double dir : {first_dir, -first_dir}) {
      const Vec2 start{x_cross, -dir * speed * t_cross};
      const auto fut = constant_velocity(start, dir * std::numbers::pi / 2.0, speed);
      if (std::any_of(fut.begin(), fut.end(), [&](Vec2 p) { return corridor.contains(p); })) {
        vru.position = start;
        vru.heading = normalize_heading(dir * std::numbers::pi / 2.0);
        vru.speed = speed;
        vru.future = fut;
        placed = true;
        break;
      }
    }
    speed *= 1.15;
  }
  s.agents.push_back(std::move(vru));

  const double stop_dist = std::max(x_cross - kYieldGap, 0.5);
  const double decel = v * v / (2.0 * stop_dist);
  s.ego.speed = v;
  s.ego.accel = -decel;
  s.gt_future = straight_future(v, -decel);
  s.map = intersection_map(x_cross, true);
  return s;
}

inline double flip(double y) noexcept { return 0.0 - y; }

inline Vec2 flip(Vec2 p) noexcept { return {p.x, flip(p.y)}; }

inline double flip_heading(double h) { return normalize_heading(flip(h)); }

}  // namespace gen

/// Reflection about the ego x-axis with left/right intents swapped.
inline Scenario mirror_scenario(const Scenario& in, std::string new_id) {
  Scenario s = in;
  s.id = std::move(new_id);
  s.ego.position = gen::flip(s.ego.position);
  s.ego.heading = gen::flip_heading(s.ego.heading);
  for (auto& a : s.agents) {
    a.position = gen::flip(a.position);
    a.heading = gen::flip_heading(a.heading);
    for (auto& p : a.future) p = gen::flip(p);
  }
  for (auto& m : s.map)
    for (auto& p : m.points) p = gen::flip(p);
  for (auto& p : s.gt_future.waypoints) p = gen::flip(p);
  s.route_intent = mirrored(s.route_intent);
  return s;
}

inline std::string scenario_id(Suite suite, std::uint64_t seed, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "-%llu-%06zu", static_cast<unsigned long long>(seed), index);
  std::string name(to_string(suite));
  std::transform(name.begin(), name.end(), name.begin(), [](char c) { return c == '_' ? '-' : static_cast<char>(c | 0x20); });
  return name + buf;
}

/// Scenario `index` of a suite drawn from its own sub-stream.
inline Scenario generate_one(const GenSpec& spec, Suite suite, std::size_t index) {
  const std::uint64_t sub_seed = substream(spec.seed, index).next();
  SplitMix64 rng(sub_seed);
  Scenario s = gen::base(scenario_id(spec.suite, spec.seed, index), sub_seed);
  if (suite == Suite::Mixed) {
    static constexpr Suite kParts[] = {Suite::Cruise, Suite::Turns, Suite::HazardVru, Suite::SymmetricFork};
    suite = kParts[rng.index(4)];
  }
  switch (suite) {
    case Suite::Cruise: return gen::cruise(spec, rng, std::move(s));
    case Suite::Turns: return gen::turns(spec, rng, std::move(s), false);
    case Suite::HazardVru: return gen::hazard(spec, rng, std::move(s));
    case Suite::SymmetricFork: return gen::turns(spec, rng, std::move(s), true);
    case Suite::Mixed: break;
  }
  return s;
}

/// SYMMETRIC_FORK emits pairs: scenario 2k+1 is scenario 2k mirrored.
inline std::vector<Scenario> generate(const GenSpec& spec) {
  spec.validate();
  std::vector<Scenario> out;
  out.reserve(spec.n_scenarios);
  for (std::size_t i = 0; i < spec.n_scenarios; ++i) {
    if (spec.suite == Suite::SymmetricFork && i % 2 == 1) {
      out.push_back(mirror_scenario(out.back(), scenario_id(spec.suite, spec.seed, i)));
      continue;
    }
    out.push_back(generate_one(spec, spec.suite, i));
  }
  for (const auto& s : out) validate(s);
  return out;
}

/// Seeded shuffle, then the first round(frac * n) go to train.
inline std::pair<std::vector<Scenario>, std::vector<Scenario>> split(const std::vector<Scenario>& scenarios,
                                                                     double train_frac, std::uint64_t seed) {
  if (scenarios.empty()) throw ConfigError("split: empty input");
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train_frac: must be in (0, 1)");
  std::vector<std::size_t> order(scenarios.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(seed);
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(std::lround(train_frac * static_cast<double>(scenarios.size())));
  std::pair<std::vector<Scenario>, std::vector<Scenario>> out;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? out.first : out.second).push_back(scenarios[order[i]]);
  return out;
}

}  // namespace vlad
