#pragma once

// Ground-truth question-answer generation for perception, prediction and
// planning, built from scenario annotations with fixed templates.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vlad/json_io.hpp"
#include "vlad/oracle.hpp"
#include "vlad/scene.hpp"

namespace vlad {

enum class QaTask { Perception, Prediction, Planning };

inline std::string_view to_string(QaTask t) noexcept {
  switch (t) {
    case QaTask::Perception: return "PERCEPTION";
    case QaTask::Prediction: return "PREDICTION";
    case QaTask::Planning: return "PLANNING";
  }
  return "?";
}

inline std::optional<QaTask> parse_qa_task(std::string_view s) noexcept {
  if (s == "PERCEPTION") return QaTask::Perception;
  if (s == "PREDICTION") return QaTask::Prediction;
  if (s == "PLANNING") return QaTask::Planning;
  return std::nullopt;
}

struct QAItem {
  QaTask task = QaTask::Perception;
  std::string question;
  std::string answer;
  std::string scenario_id;
  std::optional<MetaAction> gt_action;  ///< PLANNING only

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

inline void validate(const QAItem& q) {
  if (q.question.empty() || q.answer.empty()) throw ValidationError("qa: empty question or answer");
  if (q.scenario_id.empty()) throw ValidationError("qa: empty scenario_id");
  if ((q.task == QaTask::Planning) != q.gt_action.has_value())
    throw ValidationError("qa: gt_action must be present exactly for PLANNING items");
}

/// Compass label with north along the ego heading and west to its left.
inline std::string_view compass_direction(Vec2 ego_frame_displacement) noexcept {
  static constexpr std::array<std::string_view, 8> kNames = {"north", "northwest", "west", "southwest",
                                                               "south", "southeast", "east", "northeast"};
  const double angle = std::atan2(ego_frame_displacement.y, ego_frame_displacement.x);
  long idx = std::lround(angle / (std::numbers::pi / 4.0));
  idx = ((idx % 8) + 8) % 8;
  return kNames[static_cast<std::size_t>(idx)];
}

namespace detail {

inline std::string perception_answer(const Scenario& s) {
  using namespace text;
  std::string out;
  if (s.agents.empty()) {
    out = "There are no other road users around the ego vehicle. ";
  } else {
    for (auto sec : {Sector::Front, Sector::Left, Sector::Right, Sector::Rear}) out += sector_sentence(s, sec) + " ";
    std::vector<const AgentTrack*> vrus;
    for (const auto& a : s.agents)
      if (is_vulnerable(a.kind)) vrus.push_back(&a);
    if (vrus.empty()) {
      out += "No vulnerable road users are visible. ";
    } else {
      std::vector<std::string> parts;
      for (const auto* a : sorted_agents(s, vrus))
        parts.push_back("a " + noun(a->kind, 1) + " (id " + std::to_string(a->id) + ") " +
                        fmt1(agent_distance(s, *a)) + " m to the " + std::string(to_string(sector_of(s.ego, a->position))));
      out += "Vulnerable road users: " + join_list(parts) + ". ";
    }
  }
  return out + map_sentence(s);
}

inline std::string agent_label(const Scenario& s, const AgentTrack& a) {
  using namespace text;
  return "the " + noun(a.kind, 1) + " (id " + std::to_string(a.id) + ") located " + fmt1(agent_distance(s, a)) +
         " m to the " + std::string(to_string(sector_of(s.ego, a.position)));
}

inline std::string prediction_answer(const Scenario& s, const AgentTrack& a) {
  using namespace text;
  const Vec2 now = to_ego_frame(s.ego, a.position);
  const Vec2 end = to_ego_frame(s.ego, a.future.back());
  const Vec2 d = end - now;
  const std::string dist = fmt1(d.norm());
  if (dist == "0.0") return capitalize(agent_label(s, a)) + " will remain stationary over the next 3 seconds.";
  return capitalize(agent_label(s, a)) + " will move " + dist + " m toward the " + std::string(compass_direction(d)) +
         " over the next 3 seconds.";
}

}  // namespace detail

inline constexpr std::string_view kPerceptionQuestion =
    "Describe the scene captured by the front, left, right and rear cameras, with particular emphasis on "
    "vulnerable road users (pedestrians and cyclists) and other relevant static or dynamic actors.";

/// 1 perception item, 1 prediction item per agent, 1 planning item.
inline std::vector<QAItem> generate_qa(const Scenario& s) {
  std::vector<QAItem> items;
  items.push_back({QaTask::Perception, std::string(kPerceptionQuestion), detail::perception_answer(s), s.id, std::nullopt});
  for (const auto& a : s.agents) {
    items.push_back({QaTask::Prediction,
                     "Predict the motion of " + detail::agent_label(s, a) + " over the next 3 seconds.",
                     detail::prediction_answer(s, a), s.id, std::nullopt});
  }
  const MetaDecision d = RuleOracle::decide_rule(s);
  items.push_back({QaTask::Planning,
                   "The navigation route requests to " + text::action_phrase(s.route_intent) +
                       ". Considering the current scene and the predicted motion of the surrounding road users, "
                       "which meta-action should the ego vehicle take, and why?",
                   d.rationale_long, s.id, d.action});
  return items;
}

inline Json to_json(const QAItem& q) {
  Json j;
  j["task"] = std::string(to_string(q.task));
  j["scenario_id"] = q.scenario_id;
  j["question"] = q.question;
  j["answer"] = q.answer;
  if (q.gt_action) j["gt_action"] = std::string(to_string(*q.gt_action));
  return j;
}

inline QAItem qa_from_json(const Json& j, std::size_t line = 1) {
  const JsonReader r(j, line, "");
  if (!j.is_object()) r.fail("expected object");
  QAItem q;
  const auto task = parse_qa_task(r.at("task").string());
  if (!task) r.at("task").fail("unknown task");
  q.task = *task;
  q.scenario_id = r.at("scenario_id").string();
  q.question = r.at("question").string();
  q.answer = r.at("answer").string();
  if (r.has("gt_action")) {
    const auto a = parse_meta_action(r.at("gt_action").string());
    if (!a) r.at("gt_action").fail("unknown meta-action");
    q.gt_action = *a;
  }
  try {
    validate(q);
  } catch (const ValidationError& e) {
    throw SchemaError(line, "", e.what());
  }
  return q;
}

inline void save_qa(const std::vector<QAItem>& items, const std::filesystem::path& path) {
  std::ostringstream buf;
  for (const auto& q : items) {
    validate(q);
    buf << dump_deterministic(to_json(q)) << '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write QA file " + path.string());
  out << buf.str();
}

inline std::vector<QAItem> load_qa(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open QA file " + path.string());
  std::vector<QAItem> out;
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
    out.push_back(qa_from_json(j, line));
  }
  return out;
}

}  // namespace vlad
