#pragma once

// Meta-action oracles: the decide() interface, the rule-based oracle with
// its vulnerable-road-user turn override, and the rationale templates.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vlad/scene.hpp"

namespace vlad {

enum class ExplanationFormat { Short, Long };

inline std::string_view to_string(ExplanationFormat f) noexcept {
  return f == ExplanationFormat::Short ? "short" : "long";
}

inline std::optional<ExplanationFormat> parse_format(std::string_view s) noexcept {
  if (s == "short") return ExplanationFormat::Short;
  if (s == "long") return ExplanationFormat::Long;
  return std::nullopt;
}

struct MetaDecision {
  MetaAction action = MetaAction::GoStraight;
  std::string rationale_short;
  std::string rationale_long;
  std::vector<std::int64_t> hazard_ids;

  const std::string& rationale(ExplanationFormat f) const noexcept {
    return f == ExplanationFormat::Short ? rationale_short : rationale_long;
  }

  friend bool operator==(const MetaDecision&, const MetaDecision&) = default;
};

/// Anything that maps a scene to a meta-action with an explanation.
class MetaActionOracle {
 public:
  virtual ~MetaActionOracle() = default;
  virtual MetaDecision decide(const Scenario& scenario, ExplanationFormat format) = 0;
  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Turn corridor

/// Swath along the path of an intended turn, in the ego frame: a
/// quarter-circle arc of radius 8 m starting at the ego and bending toward
/// the turn side, followed by a 10 m straight leg along the exit direction.
/// A point is inside when it lies within 1.75 m of that centerline.
struct TurnCorridor {
  static constexpr double kRadius = 8.0;
  static constexpr double kStraightLength = 10.0;
  static constexpr double kHalfWidth = 1.75;

  double side = 1.0;  ///< +1 left, -1 right

  static TurnCorridor for_action(MetaAction turn) noexcept {
    return {turn == MetaAction::TurnRight ? -1.0 : 1.0};
  }

  Vec2 arc_center() const noexcept { return {0.0, side * kRadius}; }
  Vec2 arc_end() const noexcept { return {kRadius, side * kRadius}; }
  Vec2 leg_end() const noexcept { return {kRadius, side * (kRadius + kStraightLength)}; }

  /// Point on the arc at turning angle phi in [0, pi/2].
  Vec2 arc_point(double phi) const noexcept {
    return {kRadius * std::sin(phi), side * kRadius * (1.0 - std::cos(phi))};
  }

  double centerline_distance(Vec2 q) const noexcept {
    const Vec2 v = q - arc_center();
    double arc;
    const double phi = std::atan2(v.x, -side * v.y);
    if (phi >= 0.0 && phi <= std::numbers::pi / 2)
      arc = std::abs(v.norm() - kRadius);
    else
      arc = std::min(q.norm(), distance(q, arc_end()));

    const Vec2 a = arc_end();
    const Vec2 ab = leg_end() - a;
    const double t = std::clamp((q - a).dot(ab) / ab.dot(ab), 0.0, 1.0);
    const double leg = distance(q, a + t * ab);
    return std::min(arc, leg);
  }

  bool contains(Vec2 q) const noexcept { return centerline_distance(q) <= kHalfWidth; }
};

/// Scene-frame point expressed in the ego frame (ego at origin, x forward).
inline Vec2 to_ego_frame(const EgoState& ego, Vec2 p) noexcept {
  const Vec2 d = p - ego.position;
  const double c = std::cos(ego.heading), s = std::sin(ego.heading);
  return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

inline bool is_turn(MetaAction a) noexcept { return a != MetaAction::GoStraight; }

/// Ids of pedestrians and cyclists whose ground-truth future enters the
/// corridor of `turn` within the horizon. Empty for GO_STRAIGHT.
inline std::vector<std::int64_t> corridor_hazards(const Scenario& s, MetaAction turn) {
  std::vector<std::int64_t> ids;
  if (!is_turn(turn)) return ids;
  const auto corridor = TurnCorridor::for_action(turn);
  for (const auto& a : s.agents) {
    if (!is_vulnerable(a.kind)) continue;
    const bool hit = std::any_of(a.future.begin(), a.future.end(),
                                 [&](Vec2 p) { return corridor.contains(to_ego_frame(s.ego, p)); });
    if (hit) ids.push_back(a.id);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Text templates

enum class Sector { Front, Left, Right, Rear };

inline std::string_view to_string(Sector s) noexcept {
  switch (s) {
    case Sector::Front: return "front";
    case Sector::Left: return "left";
    case Sector::Right: return "right";
    case Sector::Rear: return "rear";
  }
  return "?";
}

/// front: |bearing| <= 45 deg; left: (45, 135]; right: [-135, -45); rear otherwise.
inline Sector sector_of(const EgoState& ego, Vec2 p) noexcept {
  const Vec2 q = to_ego_frame(ego, p);
  const double deg = std::atan2(q.y, q.x) * 180.0 / std::numbers::pi;
  if (std::abs(deg) <= 45.0) return Sector::Front;
  if (deg > 45.0 && deg <= 135.0) return Sector::Left;
  if (deg >= -135.0 && deg < -45.0) return Sector::Right;
  return Sector::Rear;
}

namespace text {

inline std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", std::round(v * 10.0) / 10.0 + 0.0);
  return buf;
}

inline std::string noun(AgentKind k, std::size_t count) {
  std::string n;
  switch (k) {
    case AgentKind::Vehicle: n = "vehicle"; break;
    case AgentKind::Pedestrian: n = "pedestrian"; break;
    case AgentKind::Cyclist: n = "cyclist"; break;
  }
  return count == 1 ? n : n + "s";
}

inline std::string polyline_noun(PolylineKind k, std::size_t count) {
  std::string n;
  switch (k) {
    case PolylineKind::LaneCenter: n = "lane centerline"; break;
    case PolylineKind::LaneBoundary: n = "lane boundary"; break;
    case PolylineKind::Crosswalk: n = "crosswalk"; break;
  }
  if (count == 1) return n;
  return k == PolylineKind::LaneBoundary ? "lane boundaries" : n + "s";
}

/// "a", "a and b", "a, b and c".
inline std::string join_list(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += (i + 1 == parts.size()) ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

inline std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

inline std::string action_phrase(MetaAction a) {
  switch (a) {
    case MetaAction::GoStraight: return "go straight";
    case MetaAction::TurnLeft: return "turn left";
    case MetaAction::TurnRight: return "turn right";
  }
  return "?";
}

inline std::string turn_noun(MetaAction a) { return a == MetaAction::TurnRight ? "right turn" : "left turn"; }

/// Clause every override rationale carries.
inline std::string postponement_clause(MetaAction turn) { return "postpone the " + turn_noun(turn); }

/// Counts by kind in fixed kind order, e.g. "2 pedestrians and 1 cyclist".
inline std::string kind_summary(const std::vector<const AgentTrack*>& agents) {
  std::vector<std::string> parts;
  for (auto k : {AgentKind::Vehicle, AgentKind::Pedestrian, AgentKind::Cyclist}) {
    const auto n = static_cast<std::size_t>(
        std::count_if(agents.begin(), agents.end(), [&](const AgentTrack* a) { return a->kind == k; }));
    if (n > 0) parts.push_back(std::to_string(n) + " " + noun(k, n));
  }
  return join_list(parts);
}

inline double agent_distance(const Scenario& s, const AgentTrack& a) { return distance(s.ego.position, a.position); }

/// Agents sorted by (kind, distance, id) for stable listing.
inline std::vector<const AgentTrack*> sorted_agents(const Scenario& s, const std::vector<const AgentTrack*>& in) {
  auto out = in;
  std::sort(out.begin(), out.end(), [&](const AgentTrack* a, const AgentTrack* b) {
    if (a->kind != b->kind) return a->kind < b->kind;
    const double da = agent_distance(s, *a), db = agent_distance(s, *b);
    if (da != db) return da < db;
    return a->id < b->id;
  });
  return out;
}

/// "Front camera: 1 vehicle at 12.0 m and 2 pedestrians at 5.1 m and 6.0 m."
inline std::string sector_sentence(const Scenario& s, Sector sector) {
  std::vector<const AgentTrack*> in;
  for (const auto& a : s.agents)
    if (sector_of(s.ego, a.position) == sector) in.push_back(&a);
  std::string out = capitalize(std::string(to_string(sector))) + " camera: ";
  if (in.empty()) return out + "no road users.";
  std::vector<std::string> groups;
  const auto sorted = sorted_agents(s, in);
  for (auto k : {AgentKind::Vehicle, AgentKind::Pedestrian, AgentKind::Cyclist}) {
    std::vector<std::string> dists;
    for (const auto* a : sorted)
      if (a->kind == k) dists.push_back(fmt1(agent_distance(s, *a)) + " m");
    if (!dists.empty()) groups.push_back(std::to_string(dists.size()) + " " + noun(k, dists.size()) + " at " + join_list(dists));
  }
  return out + join_list(groups) + ".";
}

inline std::string map_sentence(const Scenario& s) {
  std::vector<std::string> parts;
  for (auto k : {PolylineKind::LaneCenter, PolylineKind::LaneBoundary, PolylineKind::Crosswalk}) {
    const auto n = static_cast<std::size_t>(
        std::count_if(s.map.begin(), s.map.end(), [&](const MapPolyline& m) { return m.kind == k; }));
    if (n > 0) parts.push_back(std::to_string(n) + " " + polyline_noun(k, n));
  }
  if (parts.empty()) return "Map: no mapped elements nearby.";
  return "Map: " + join_list(parts) + ".";
}

inline std::string scene_description(const Scenario& s) {
  std::string out;
  for (auto sec : {Sector::Front, Sector::Left, Sector::Right, Sector::Rear}) out += sector_sentence(s, sec) + " ";
  return out + map_sentence(s);
}

}  // namespace text

inline MetaDecision build_decision(const Scenario& s, MetaAction action, const std::vector<std::int64_t>& hazards) {
  using namespace text;
  MetaDecision d;
  d.action = action;
  d.hazard_ids = hazards;

  std::string justification;
  std::string head;
  if (!hazards.empty()) {
    std::vector<const AgentTrack*> vrus;
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& a : s.agents) {
      if (std::find(hazards.begin(), hazards.end(), a.id) == hazards.end()) continue;
      vrus.push_back(&a);
      nearest = std::min(nearest, agent_distance(s, a));
    }
    head = "go straight and " + postponement_clause(s.route_intent);
    justification = kind_summary(vrus) + (vrus.size() == 1 ? " is" : " are") +
                    " crossing the turn path, vulnerable road user in path, the nearest " + fmt1(nearest) + " m away";
  } else {
    head = action_phrase(action);
    justification = std::string(is_turn(action) ? "the turn path" : "the lane ahead") + " is clear to proceed";
    if (s.agents.empty()) {
      justification += " with no other road users nearby";
    } else {
      std::vector<const AgentTrack*> all;
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& a : s.agents) {
        all.push_back(&a);
        nearest = std::min(nearest, agent_distance(s, a));
      }
      justification += " with " + kind_summary(all) + " nearby, the nearest " + fmt1(nearest) + " m away";
    }
  }
  d.rationale_short = capitalize(head) + " because " + justification + ".";
  d.rationale_long = scene_description(s) + " Decision: " + d.rationale_short;
  return d;
}

/// Deterministic stand-in for the fine-tuned VLM. Follows the route intent
/// unless a pedestrian or cyclist future enters the intended turn corridor,
/// in which case the turn is postponed and the ego goes straight.
class RuleOracle final : public MetaActionOracle {
 public:
  static MetaDecision decide_rule(const Scenario& s) {
    const auto hazards = corridor_hazards(s, s.route_intent);
    const MetaAction action = hazards.empty() ? s.route_intent : MetaAction::GoStraight;
    return build_decision(s, action, hazards);
  }

  MetaDecision decide(const Scenario& s, ExplanationFormat) override { return decide_rule(s); }
  std::string name() const override { return "rule"; }
};

inline MetaDecision rule_oracle_decide(const Scenario& s, ExplanationFormat format = ExplanationFormat::Short) {
  RuleOracle o;
  return o.decide(s, format);
}

/// Always answers the same label; rationales come from the clear-path template.
class ConstantOracle final : public MetaActionOracle {
 public:
  explicit ConstantOracle(MetaAction action) : action_(action) {}
  MetaDecision decide(const Scenario& s, ExplanationFormat) override { return build_decision(s, action_, {}); }
  std::string name() const override { return "const:" + std::string(to_string(action_)); }

 private:
  MetaAction action_;
};

/// 100 * matches / total.
inline double planning_accuracy(const std::vector<MetaAction>& decisions, const std::vector<MetaAction>& labels) {
  if (decisions.size() != labels.size()) throw ValidationError("planning_accuracy: length mismatch");
  if (decisions.empty()) throw ValidationError("planning_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += decisions[i] == labels[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace vlad
