#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "test_support.hpp"
#include "vlad/json_io.hpp"
#include "vlad/rng.hpp"
#include "vlad/scene.hpp"
#include "vlad/scene_io.hpp"

using namespace vlad;
using vlad::testing::TempDir;

namespace {

constexpr double kPi = std::numbers::pi;

// Repeatedly add or subtract 2*pi until the value lands in (-pi, pi].
double heading_by_loop(double t) {
  while (t > kPi) t -= 2.0 * kPi;
  while (t <= -kPi) t += 2.0 * kPi;
  return t;
}

}  // namespace

TEST(NormalizeHeading, Examples) {
  EXPECT_EQ(normalize_heading(0.0), 0.0);
  EXPECT_NEAR(normalize_heading(3.0 * kPi), kPi, 1e-12);
  const double expected = -7.5 + 2.0 * kPi * std::ceil((7.5 - kPi) / (2.0 * kPi));
  EXPECT_NEAR(normalize_heading(-7.5), expected, 1e-12);
  EXPECT_NEAR(normalize_heading(-7.5), heading_by_loop(-7.5), 1e-12);
  EXPECT_EQ(normalize_heading(-kPi), kPi);
}

TEST(NormalizeHeading, MatchesLoopOracleAndIsIdempotent) {
  SplitMix64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    const double t = rng.uniform(-60.0, 60.0);
    const double n = normalize_heading(t);
    EXPECT_GT(n, -kPi);
    EXPECT_LE(n, kPi);
    EXPECT_NEAR(n, heading_by_loop(t), 1e-9) << t;
    EXPECT_EQ(normalize_heading(n), n);
  }
}

TEST(NormalizeHeading, RejectsNonFinite) {
  EXPECT_THROW(normalize_heading(std::numeric_limits<double>::quiet_NaN()), ValidationError);
  EXPECT_THROW(normalize_heading(std::numeric_limits<double>::infinity()), ValidationError);
}

TEST(MetaAction, ParseFormatRoundTrip) {
  for (auto a : kAllActions) EXPECT_EQ(parse_meta_action(to_string(a)), a);
  EXPECT_FALSE(parse_meta_action("REVERSE").has_value());
  EXPECT_FALSE(parse_meta_action("go_straight").has_value());
  for (auto k : {AgentKind::Vehicle, AgentKind::Pedestrian, AgentKind::Cyclist}) EXPECT_EQ(parse_agent_kind(to_string(k)), k);
  for (auto k : {PolylineKind::LaneCenter, PolylineKind::LaneBoundary, PolylineKind::Crosswalk})
    EXPECT_EQ(parse_polyline_kind(to_string(k)), k);
}

TEST(Validate, AcceptsSimpleScenario) { EXPECT_NO_THROW(validate(vlad::testing::simple_scenario())); }

TEST(Validate, RejectsBrokenFields) {
  auto bad = [](auto mutate) {
    auto s = vlad::testing::simple_scenario();
    s.agents.push_back(vlad::testing::agent(3, AgentKind::Vehicle, {10, 3.5}, {5, 0}));
    mutate(s);
    return s;
  };
  EXPECT_THROW(validate(bad([](Scenario& s) { s.id.clear(); })), ValidationError);
  EXPECT_THROW(validate(bad([](Scenario& s) { s.ego.speed = -1; })), ValidationError);
  EXPECT_THROW(validate(bad([](Scenario& s) { s.ego.heading = 4.0; })), ValidationError);
  EXPECT_THROW(validate(bad([](Scenario& s) { s.ego.accel = std::nan(""); })), ValidationError);
  EXPECT_THROW(validate(bad([](Scenario& s) { s.agents[0].width = 0; })), ValidationError);
  EXPECT_THROW(validate(bad([](Scenario& s) { s.agents[0].future.pop_back(); })), ValidationError);
  EXPECT_THROW(validate(bad([](Scenario& s) { s.agents.push_back(s.agents[0]); })), ValidationError);
  EXPECT_THROW(validate(bad([](Scenario& s) { s.map[0].points[1] = s.map[0].points[0]; })), ValidationError);
  EXPECT_THROW(validate(bad([](Scenario& s) { s.map[0].points.pop_back(); })), ValidationError);
  EXPECT_THROW(validate(bad([](Scenario& s) { s.gt_future.waypoints.push_back({}); })), ValidationError);
  try {
    validate(bad([](Scenario& s) { s.agents[0].length = -2; }));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("agents[0].length"), std::string::npos);
  }
}

TEST(ScenarioIo, EmptyFileGivesEmptyList) {
  TempDir dir;
  vlad::testing::spit(dir / "empty.jsonl", "");
  EXPECT_TRUE(load_scenarios(dir / "empty.jsonl").empty());
}

TEST(ScenarioIo, TwoLinesInOrder) {
  TempDir dir;
  auto a = vlad::testing::simple_scenario("a");
  auto b = vlad::testing::simple_scenario("b", 3.0);
  vlad::testing::spit(dir / "two.jsonl", to_jsonl_line(a) + "\n" + to_jsonl_line(b) + "\n");
  const auto loaded = load_scenarios(dir / "two.jsonl");
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0], a);
  EXPECT_EQ(loaded[1], b);
}

TEST(ScenarioIo, SevenPointFutureNamesFieldAndLine) {
  auto j = to_json(vlad::testing::simple_scenario());
  j["gt_future"].push_back(Json::array({1.0, 2.0}));
  std::istringstream in(dump_deterministic(j) + "\n");
  try {
    parse_scenarios(in);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_EQ(e.field(), "gt_future");
  }

  std::istringstream second(to_jsonl_line(vlad::testing::simple_scenario("ok")) + "\n" + dump_deterministic(j) + "\n");
  try {
    parse_scenarios(second);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ScenarioIo, NestedFieldPaths) {
  auto s = vlad::testing::simple_scenario();
  s.agents.push_back(vlad::testing::agent(4, AgentKind::Pedestrian, {3, 3}, {0, -1}));
  auto j = to_json(s);
  j["agents"][0]["kind"] = "TRUCK";
  std::istringstream in(dump_deterministic(j));
  try {
    parse_scenarios(in);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "agents[0].kind");
  }
  j = to_json(s);
  j["ego"].erase("speed");
  std::istringstream missing(dump_deterministic(j));
  try {
    parse_scenarios(missing);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "ego.speed");
  }
}

TEST(ScenarioIo, DuplicateIdRejected) {
  const auto line = to_jsonl_line(vlad::testing::simple_scenario("dup"));
  std::istringstream in(line + "\n" + line + "\n");
  EXPECT_THROW(parse_scenarios(in), SchemaError);
}

TEST(ScenarioIo, MissingFileIsIoError) { EXPECT_THROW(load_scenarios("/nonexistent/x.jsonl"), IoError); }

TEST(ScenarioIo, RoundTripAndByteDeterminism) {
  TempDir dir;
  std::vector<Scenario> list;
  SplitMix64 rng(5);
  for (int i = 0; i < 5; ++i) {
    auto s = vlad::testing::simple_scenario("r" + std::to_string(i), rng.uniform(0, 10));
    s.ego.heading = normalize_heading(rng.uniform(-10, 10));
    s.ego.accel = rng.uniform(-2, 2);
    s.seed = rng.next();
    s.route_intent = kAllActions[rng.index(3)];
    s.agents.push_back(vlad::testing::agent(7, AgentKind::Cyclist, {rng.uniform(), 0.1 * i}, {1.0 / 3.0, 2.0}));
    list.push_back(s);
  }
  save_scenarios(list, dir / "a.jsonl");
  save_scenarios(list, dir / "b.jsonl");
  EXPECT_EQ(load_scenarios(dir / "a.jsonl"), list);
  EXPECT_EQ(vlad::testing::slurp(dir / "a.jsonl"), vlad::testing::slurp(dir / "b.jsonl"));
}

TEST(ScenarioIo, KeyOrderAndSeventeenDigits) {
  auto s = vlad::testing::simple_scenario("k");
  s.ego.accel = 0.1;
  const auto line = to_jsonl_line(s);
  EXPECT_EQ(line.rfind(R"({"id":"k","seed":1,"ego":{"x":0,"y":0,"heading":0,"speed":5,"accel":0.10000000000000001},"agents":[],"map":[)", 0),
            0u)
      << line;
  EXPECT_LT(line.find("\"route_intent\""), line.find("\"gt_future\""));
}

TEST(ScenarioIo, TooManyAgentsRejectedBeforeWrite) {
  TempDir dir;
  auto s = vlad::testing::simple_scenario();
  for (int i = 0; i < 9; ++i) s.agents.push_back(vlad::testing::agent(i, AgentKind::Vehicle, {10.0 + 6 * i, 3.5}, {4, 0}));
  EXPECT_THROW(save_scenarios({s}, dir / "nine.jsonl"), ValidationError);
  EXPECT_FALSE(std::filesystem::exists(dir / "nine.jsonl"));
}

TEST(Json, RejectsNonFiniteOnDump) {
  Json j;
  j["x"] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(dump_deterministic(j), std::exception);
}

TEST(Rng, SplitMixReferenceValues) {
  // First outputs of SplitMix64 seeded with 0, as published with the algorithm.
  SplitMix64 r(0);
  EXPECT_EQ(r.next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(r.next(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(r.next(), 0x06c45d188009454fULL);
}

TEST(Rng, ShuffleIsPermutation) {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  SplitMix64 r(3);
  auto w = v;
  shuffle(w, r);
  EXPECT_NE(w, v);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(w, v);
}
