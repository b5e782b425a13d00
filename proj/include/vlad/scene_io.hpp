#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vlad/json_io.hpp"
#include "vlad/scene.hpp"

namespace vlad {

namespace detail {

inline Json points_to_json(const std::vector<Vec2>& pts) {
  Json arr = Json::array();
  for (const auto& p : pts) arr.push_back(Json::array({p.x, p.y}));
  return arr;
}

inline std::vector<Vec2> points_from_json(const JsonReader& r, std::size_t expected) {
  const std::size_t n = r.array_size();
  if (n != expected)
    r.fail("expected " + std::to_string(expected) + " points, got " + std::to_string(n));
  std::vector<Vec2> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = r.at(i);
    if (p.array_size() != 2) p.fail("expected [x, y]");
    pts.push_back({p.at(std::size_t{0}).number(), p.at(std::size_t{1}).number()});
  }
  return pts;
}

}  // namespace detail

inline Json to_json(const Scenario& s) {
  Json j;
  j["id"] = s.id;
  j["seed"] = s.seed;
  j["ego"] = Json{{"x", s.ego.position.x},
                  {"y", s.ego.position.y},
                  {"heading", s.ego.heading},
                  {"speed", s.ego.speed},
                  {"accel", s.ego.accel}};
  Json agents = Json::array();
  for (const auto& a : s.agents) {
    agents.push_back(Json{{"id", a.id},
                          {"kind", std::string(to_string(a.kind))},
                          {"x", a.position.x},
                          {"y", a.position.y},
                          {"heading", a.heading},
                          {"speed", a.speed},
                          {"length", a.length},
                          {"width", a.width},
                          {"future", detail::points_to_json(a.future)}});
  }
  j["agents"] = std::move(agents);
  Json map = Json::array();
  for (const auto& m : s.map) {
    map.push_back(Json{{"id", m.id},
                       {"kind", std::string(to_string(m.kind))},
                       {"points", detail::points_to_json(m.points)}});
  }
  j["map"] = std::move(map);
  j["route_intent"] = std::string(to_string(s.route_intent));
  j["gt_future"] = detail::points_to_json(s.gt_future.waypoints);
  return j;
}

/// Decodes one scenario object; `line` is used for error reporting only.
/// Validates all invariants and reports violations as SchemaError.
inline Scenario scenario_from_json(const Json& j, std::size_t line = 1) {
  const JsonReader root(j, line, "");
  if (!j.is_object()) root.fail("expected object");
  Scenario s;
  s.id = root.at("id").string();
  if (s.id.empty()) root.at("id").fail("empty id");
  s.seed = root.at("seed").unsigned_integer();

  const auto ego = root.at("ego");
  s.ego.position = {ego.at("x").number(), ego.at("y").number()};
  s.ego.heading = ego.at("heading").number();
  s.ego.speed = ego.at("speed").number();
  s.ego.accel = ego.at("accel").number();

  const auto agents = root.at("agents");
  const std::size_t na = agents.array_size();
  if (na > kMaxAgents) agents.fail("at most " + std::to_string(kMaxAgents) + " agents allowed");
  for (std::size_t i = 0; i < na; ++i) {
    const auto a = agents.at(i);
    AgentTrack t;
    t.id = a.at("id").integer();
    const auto kind = parse_agent_kind(a.at("kind").string());
    if (!kind) a.at("kind").fail("unknown agent kind");
    t.kind = *kind;
    t.position = {a.at("x").number(), a.at("y").number()};
    t.heading = a.at("heading").number();
    t.speed = a.at("speed").number();
    t.length = a.at("length").number();
    t.width = a.at("width").number();
    t.future = detail::points_from_json(a.at("future"), kFutureSteps);
    s.agents.push_back(std::move(t));
  }

  const auto map = root.at("map");
  const std::size_t nm = map.array_size();
  if (nm > kMaxPolylines) map.fail("at most " + std::to_string(kMaxPolylines) + " polylines allowed");
  for (std::size_t i = 0; i < nm; ++i) {
    const auto m = map.at(i);
    MapPolyline p;
    p.id = m.at("id").integer();
    const auto kind = parse_polyline_kind(m.at("kind").string());
    if (!kind) m.at("kind").fail("unknown polyline kind");
    p.kind = *kind;
    p.points = detail::points_from_json(m.at("points"), kPolylinePoints);
    s.map.push_back(std::move(p));
  }

  const auto intent = parse_meta_action(root.at("route_intent").string());
  if (!intent) root.at("route_intent").fail("unknown meta-action");
  s.route_intent = *intent;
  s.gt_future = Trajectory(detail::points_from_json(root.at("gt_future"), kFutureSteps));

  try {
    validate(s);
  } catch (const ValidationError& e) {
    throw SchemaError(line, "", e.what());
  }
  return s;
}

inline std::string to_jsonl_line(const Scenario& s) { return dump_deterministic(to_json(s)); }

/// Parses JSONL text; blank lines are skipped but still counted.
inline std::vector<Scenario> parse_scenarios(std::istream& in) {
  std::vector<Scenario> out;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw SchemaError(line, "", std::string("invalid JSON: ") + e.what());
    }
    auto s = scenario_from_json(j, line);
    if (!ids.insert(s.id).second) throw SchemaError(line, "id", "duplicate scenario id '" + s.id + "'");
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  return parse_scenarios(in);
}

/// Validates everything first, so an invalid list never touches the file.
inline void save_scenarios(const std::vector<Scenario>& scenarios, const std::filesystem::path& path) {
  std::set<std::string> ids;
  for (const auto& s : scenarios) {
    validate(s);
    if (!ids.insert(s.id).second) throw ValidationError("duplicate scenario id '" + s.id + "'");
  }
  std::ostringstream buf;
  for (const auto& s : scenarios) buf << to_jsonl_line(s) << '\n';
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write scenario file " + path.string());
  out << buf.str();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace vlad
