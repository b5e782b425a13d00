#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vlad/errors.hpp"

namespace vlad {

/// Waypoints per trajectory: 3 s at 2 Hz.
inline constexpr std::size_t kFutureSteps = 6;
inline constexpr double kStepSeconds = 0.5;
/// Fixed query budgets of the planner.
inline constexpr std::size_t kMaxAgents = 8;
inline constexpr std::size_t kMaxPolylines = 8;
inline constexpr std::size_t kPolylinePoints = 4;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) noexcept = default;

  double norm() const noexcept { return std::hypot(x, y); }
  double dot(Vec2 o) const noexcept { return x * o.x + y * o.y; }
  bool finite() const noexcept { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(Vec2 a, Vec2 b) noexcept { return (a - b).norm(); }

/// Maps any finite angle into (-pi, pi].
inline double normalize_heading(double theta) {
  if (!std::isfinite(theta)) throw ValidationError("normalize_heading: non-finite angle");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(theta, two_pi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

enum class AgentKind { Vehicle, Pedestrian, Cyclist };
enum class PolylineKind { LaneCenter, LaneBoundary, Crosswalk };
enum class MetaAction { GoStraight, TurnLeft, TurnRight };

inline constexpr std::array<MetaAction, 3> kAllActions = {MetaAction::GoStraight, MetaAction::TurnLeft,
                                                          MetaAction::TurnRight};

inline std::string_view to_string(AgentKind k) noexcept {
  switch (k) {
    case AgentKind::Vehicle: return "VEHICLE";
    case AgentKind::Pedestrian: return "PEDESTRIAN";
    case AgentKind::Cyclist: return "CYCLIST";
  }
  return "?";
}

inline std::string_view to_string(PolylineKind k) noexcept {
  switch (k) {
    case PolylineKind::LaneCenter: return "LANE_CENTER";
    case PolylineKind::LaneBoundary: return "LANE_BOUNDARY";
    case PolylineKind::Crosswalk: return "CROSSWALK";
  }
  return "?";
}

inline std::string_view to_string(MetaAction a) noexcept {
  switch (a) {
    case MetaAction::GoStraight: return "GO_STRAIGHT";
    case MetaAction::TurnLeft: return "TURN_LEFT";
    case MetaAction::TurnRight: return "TURN_RIGHT";
  }
  return "?";
}

inline std::optional<AgentKind> parse_agent_kind(std::string_view s) noexcept {
  if (s == "VEHICLE") return AgentKind::Vehicle;
  if (s == "PEDESTRIAN") return AgentKind::Pedestrian;
  if (s == "CYCLIST") return AgentKind::Cyclist;
  return std::nullopt;
}

inline std::optional<PolylineKind> parse_polyline_kind(std::string_view s) noexcept {
  if (s == "LANE_CENTER") return PolylineKind::LaneCenter;
  if (s == "LANE_BOUNDARY") return PolylineKind::LaneBoundary;
  if (s == "CROSSWALK") return PolylineKind::Crosswalk;
  return std::nullopt;
}

inline std::optional<MetaAction> parse_meta_action(std::string_view s) noexcept {
  for (auto a : kAllActions)
    if (to_string(a) == s) return a;
  return std::nullopt;
}

inline bool is_vulnerable(AgentKind k) noexcept {
  return k == AgentKind::Pedestrian || k == AgentKind::Cyclist;
}

inline MetaAction mirrored(MetaAction a) noexcept {
  switch (a) {
    case MetaAction::TurnLeft: return MetaAction::TurnRight;
    case MetaAction::TurnRight: return MetaAction::TurnLeft;
    default: return a;
  }
}

struct EgoState {
  Vec2 position;
  double heading = 0.0;
  double speed = 0.0;
  double accel = 0.0;

  friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct AgentTrack {
  std::int64_t id = 0;
  AgentKind kind = AgentKind::Vehicle;
  Vec2 position;
  double heading = 0.0;
  double speed = 0.0;
  double length = 4.5;
  double width = 1.9;
  std::vector<Vec2> future;  ///< kFutureSteps points at 0.5 s spacing

  friend bool operator==(const AgentTrack&, const AgentTrack&) = default;
};

struct MapPolyline {
  std::int64_t id = 0;
  PolylineKind kind = PolylineKind::LaneCenter;
  std::vector<Vec2> points;  ///< kPolylinePoints points

  friend bool operator==(const MapPolyline&, const MapPolyline&) = default;
};

/// Ego waypoints at t = 0.5 k s, k = 1..kFutureSteps.
struct Trajectory {
  std::vector<Vec2> waypoints;

  Trajectory() : waypoints(kFutureSteps) {}
  explicit Trajectory(std::vector<Vec2> pts) : waypoints(std::move(pts)) {}

  std::size_t size() const noexcept { return waypoints.size(); }
  const Vec2& operator[](std::size_t i) const { return waypoints[i]; }
  Vec2& operator[](std::size_t i) { return waypoints[i]; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Ground-truth vectorized driving scene in the ego frame at t = 0.
struct Scenario {
  std::string id;
  std::uint64_t seed = 0;
  EgoState ego;
  std::vector<AgentTrack> agents;
  std::vector<MapPolyline> map;
  MetaAction route_intent = MetaAction::GoStraight;
  Trajectory gt_future;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

namespace detail {

inline bool finite(double v) noexcept { return std::isfinite(v); }

inline void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) throw ValidationError(where + ": " + what);
}

}  // namespace detail

inline void validate(const EgoState& ego, const std::string& where = "ego") {
  using detail::require;
  require(ego.position.finite() && detail::finite(ego.heading) && detail::finite(ego.speed) &&
              detail::finite(ego.accel),
          where, "non-finite field");
  require(ego.heading > -std::numbers::pi && ego.heading <= std::numbers::pi, where + ".heading",
          "not normalized to (-pi, pi]");
  require(ego.speed >= 0.0, where + ".speed", "negative");
}

inline void validate(const Trajectory& t, const std::string& where = "trajectory") {
  detail::require(t.size() == kFutureSteps, where,
                  "expected " + std::to_string(kFutureSteps) + " waypoints, got " + std::to_string(t.size()));
  for (const auto& p : t.waypoints) detail::require(p.finite(), where, "non-finite waypoint");
}

inline void validate(const AgentTrack& a, const std::string& where = "agent") {
  using detail::require;
  require(a.position.finite() && detail::finite(a.heading) && detail::finite(a.speed), where, "non-finite field");
  require(detail::finite(a.length) && a.length > 0.0, where + ".length", "must be positive");
  require(detail::finite(a.width) && a.width > 0.0, where + ".width", "must be positive");
  require(a.future.size() == kFutureSteps, where + ".future",
          "expected " + std::to_string(kFutureSteps) + " points, got " + std::to_string(a.future.size()));
  for (const auto& p : a.future) require(p.finite(), where + ".future", "non-finite point");
}

inline void validate(const MapPolyline& m, const std::string& where = "polyline") {
  using detail::require;
  require(m.points.size() == kPolylinePoints, where + ".points",
          "expected " + std::to_string(kPolylinePoints) + " points, got " + std::to_string(m.points.size()));
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    require(m.points[i].finite(), where + ".points", "non-finite point");
    if (i > 0) require(!(m.points[i] == m.points[i - 1]), where + ".points", "consecutive duplicate points");
  }
}

/// Checks every Scenario invariant; throws ValidationError naming the field.
inline void validate(const Scenario& s) {
  using detail::require;
  require(!s.id.empty(), "id", "empty");
  validate(s.ego);
  require(s.agents.size() <= kMaxAgents, "agents",
          "at most " + std::to_string(kMaxAgents) + " agents allowed, got " + std::to_string(s.agents.size()));
  require(s.map.size() <= kMaxPolylines, "map",
          "at most " + std::to_string(kMaxPolylines) + " polylines allowed, got " + std::to_string(s.map.size()));
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const std::string where = "agents[" + std::to_string(i) + "]";
    validate(s.agents[i], where);
    require(ids.insert(s.agents[i].id).second, where + ".id", "duplicate agent id");
  }
  for (std::size_t i = 0; i < s.map.size(); ++i) validate(s.map[i], "map[" + std::to_string(i) + "]");
  validate(s.gt_future, "gt_future");
}

}  // namespace vlad
