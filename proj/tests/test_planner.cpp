#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gradcheck.hpp"
#include "test_support.hpp"
#include "vlad/oracle.hpp"
#include "vlad/planner.hpp"
#include "vlad/planner_train.hpp"
#include "vlad/rng.hpp"
#include "vlad/simgen.hpp"

using namespace vlad;
using vlad::testing::agent;
using vlad::testing::simple_scenario;

namespace {

PlannerConfig tiny(int d = 2, int heads = 1, int hidden = 2) {
  PlannerConfig c;
  c.d_model = d;
  c.n_heads = heads;
  c.hidden = hidden;
  return c;
}

// Scalar-loop evaluation of W2 tanh(W1 x + b1) + b2.
std::vector<double> mlp_by_hand(const Mlp& m, const std::vector<double>& x) {
  std::vector<double> h(static_cast<std::size_t>(m.w1.rows()));
  for (std::size_t i = 0; i < h.size(); ++i) {
    double z = m.b1(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < x.size(); ++j) z += m.w1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
    h[i] = std::tanh(z);
  }
  std::vector<double> y(static_cast<std::size_t>(m.w2.rows()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    double z = m.b2(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < h.size(); ++j) z += m.w2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * h[j];
    y[i] = z;
  }
  return y;
}

Scenario busy_scenario(std::uint64_t seed, std::size_t n_agents, std::size_t n_map) {
  SplitMix64 rng(seed);
  Scenario s = simple_scenario("busy", rng.uniform(1, 8));
  s.ego.accel = rng.uniform(-1, 1);
  s.map.clear();
  for (std::size_t i = 0; i < n_map; ++i)
    s.map.push_back({static_cast<std::int64_t>(i), PolylineKind::LaneCenter,
                     vlad::testing::line_points({rng.uniform(-20, 20), rng.uniform(-10, 10)},
                                                {rng.uniform(1, 5), rng.uniform(-1, 1)}, kPolylinePoints)});
  for (std::size_t i = 0; i < n_agents; ++i)
    s.agents.push_back(agent(static_cast<std::int64_t>(10 + i), i % 2 ? AgentKind::Pedestrian : AgentKind::Vehicle,
                             {rng.uniform(-25, 25), rng.uniform(-10, 10)}, {rng.uniform(-6, 6), rng.uniform(-2, 2)}));
  for (std::size_t k = 0; k < kFutureSteps; ++k) s.gt_future[k] = {s.gt_future[k].x, 0.2 * static_cast<double>(k * k)};
  return s;
}

double max_abs_diff(const Trajectory& a, const Trajectory& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max({m, std::abs(a[k].x - b[k].x), std::abs(a[k].y - b[k].y)});
  return m;
}

}  // namespace

TEST(PlannerConfig, Validation) {
  EXPECT_NO_THROW(PlannerConfig{}.validate());
  EXPECT_THROW(tiny(3, 2).validate(), ConfigError);
  EXPECT_THROW(tiny(0, 1).validate(), ConfigError);
  PlannerConfig c;
  c.t_f = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(PlannerConfig{}.head_input_dim(), 2 * 32 + 6);
}

TEST(InitModel, SeedsAndBounds) {
  const auto a = init_model(PlannerConfig{}, 1);
  const auto b = init_model(PlannerConfig{}, 1);
  const auto c = init_model(PlannerConfig{}, 2);
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
  EXPECT_NE(a.params.flatten(), c.params.flatten());

  // hidden = 4 makes every second-layer weight matrix have fan_in 4.
  const auto m = init_model(tiny(2, 1, 4), 9);
  for (const Mlp* mlp : {&m.params.agent_enc, &m.params.map_enc, &m.params.pe1, &m.params.pe2, &m.params.plan_head}) {
    EXPECT_EQ(mlp->w2.cols(), 4);
    EXPECT_LE(mlp->w2.cwiseAbs().maxCoeff(), 0.5);
    EXPECT_GT(mlp->w2.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(mlp->b1.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(mlp->b2.cwiseAbs().maxCoeff(), 0.0);
  }
  m.params.for_each([&](const std::string& name, const auto& arr) {
    const double fan_in = name == "ego_query" ? 2.0 : static_cast<double>(arr.cols());
    EXPECT_LE(arr.cwiseAbs().maxCoeff(), std::sqrt(1.0 / fan_in)) << name;
  });
}

TEST(Params, ClosedNameSetInCanonicalOrder) {
  std::vector<std::string> names;
  PlannerParams::zeros(PlannerConfig{}).for_each([&](const std::string& n, const auto&) { names.push_back(n); });
  const std::vector<std::string> expected = {
      "ego_query",    "agent_enc.w1", "agent_enc.b1", "agent_enc.w2", "agent_enc.b2", "map_enc.w1",   "map_enc.b1",
      "map_enc.w2",   "map_enc.b2",   "pe1.w1",       "pe1.b1",       "pe1.w2",       "pe1.b2",       "pe2.w1",
      "pe2.b1",       "pe2.w2",       "pe2.b2",       "attn1.wq",     "attn1.wk",     "attn1.wv",     "attn1.wo",
      "attn2.wq",     "attn2.wk",     "attn2.wv",     "attn2.wo",     "plan_head.w1", "plan_head.b1", "plan_head.w2",
      "plan_head.b2"};
  EXPECT_EQ(names, expected);
}

TEST(EncodeScene, EmptySceneGivesZerosAndInvalidMask) {
  const auto m = init_model(PlannerConfig{}, 3);
  Scenario s = simple_scenario();
  s.map.clear();
  const auto e = encode_scene(m, s);
  EXPECT_EQ(e.agent_queries.rows(), 8);
  EXPECT_EQ(e.agent_queries.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(e.map_queries.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(std::all_of(e.agent_mask.begin(), e.agent_mask.end(), [](auto v) { return v == 0; }));
  EXPECT_TRUE(std::all_of(e.map_mask.begin(), e.map_mask.end(), [](auto v) { return v == 0; }));
}

TEST(EncodeScene, IdenticalAgentsGiveIdenticalRows) {
  const auto m = init_model(PlannerConfig{}, 3);
  Scenario s = simple_scenario();
  s.agents.push_back(agent(1, AgentKind::Vehicle, {12, 3.5}, {4, 0}));
  s.agents.push_back(s.agents[0]);
  s.agents[1].id = 2;
  const auto e = encode_scene(m, s);
  EXPECT_EQ(e.agent_queries.row(0), e.agent_queries.row(1));
  EXPECT_EQ(e.agent_mask[0], 1);
  EXPECT_EQ(e.agent_mask[1], 1);
  EXPECT_EQ(e.agent_mask[2], 0);
}

TEST(EncodeScene, MatchesHandComputedMlp) {
  PlannerModel m{tiny(), PlannerParams::zeros(tiny())};
  auto& enc = m.params.agent_enc;
  enc.w1 << 0.5, -0.25, 1.0, 0.0, 2.0, -1.0, 0.5,  //
      0.1, 0.2, -0.3, 0.4, -0.5, 0.6, -0.7;
  enc.b1 << 0.05, -0.1;
  enc.w2 << 1.0, -2.0, 0.5, 0.25;
  enc.b2 << 0.3, -0.4;
  Scenario s = simple_scenario();
  AgentTrack a = agent(5, AgentKind::Vehicle, {10, 20}, {3, 0});
  s.agents.push_back(a);
  const auto e = encode_scene(m, s);

  // Feature: [0.1 x, 0.1 y, cos h, sin h, 0.1 v, 0.1 L, 0.1 W]
  const std::vector<double> f = {1.0, 2.0, 1.0, 0.0, 0.3, 0.45, 0.19};
  const double z0 = 0.5 * 1.0 - 0.25 * 2.0 + 1.0 * 1.0 + 0.0 + 2.0 * 0.3 - 1.0 * 0.45 + 0.5 * 0.19 + 0.05;
  const double z1 = 0.1 * 1.0 + 0.2 * 2.0 - 0.3 * 1.0 + 0.0 - 0.5 * 0.3 + 0.6 * 0.45 - 0.7 * 0.19 - 0.1;
  const double y0 = 1.0 * std::tanh(z0) - 2.0 * std::tanh(z1) + 0.3;
  const double y1 = 0.5 * std::tanh(z0) + 0.25 * std::tanh(z1) - 0.4;
  EXPECT_NEAR(e.agent_queries(0, 0), y0, 1e-14);
  EXPECT_NEAR(e.agent_queries(0, 1), y1, 1e-14);
  const auto loop = mlp_by_hand(enc, f);
  EXPECT_NEAR(loop[0], y0, 1e-14);
}

TEST(CrossAttention, AllMaskedIsZero) {
  const auto m = init_model(tiny(4, 2, 3), 4);
  const MatrixXd src = MatrixXd::Random(3, 4);
  const auto out =
      cross_attention(m.params.attn1, 2, VectorXd::Ones(4), src, VectorXd::Ones(4), MatrixXd::Ones(3, 4), KeyMask{0, 0, 0});
  EXPECT_EQ(out, VectorXd::Zero(4));
}

TEST(CrossAttention, SingleValidKeyIsProjectedValue) {
  const auto m = init_model(tiny(4, 2, 3), 4);
  const auto& w = m.params.attn1;
  MatrixXd src(3, 4);
  src << 1, 2, 3, 4, 5, 6, 7, 8, -1, 0.5, 0.25, 2;
  for (double scale : {0.01, 1.0, 100.0}) {
    const VectorXd q = scale * VectorXd::LinSpaced(4, -1, 1);
    const auto out = cross_attention(w, 2, q, src, VectorXd::Zero(4), MatrixXd::Random(3, 4), KeyMask{0, 1, 0});
    const VectorXd expected = w.wo * (w.wv * src.row(1).transpose());
    EXPECT_LT((out - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CrossAttention, TwoKeysHandComputed) {
  AttentionWeights w{MatrixXd(2, 2), MatrixXd(2, 2), MatrixXd(2, 2), MatrixXd(2, 2)};
  w.wq << 1, 2, 0, 1;
  w.wk << 0.5, 0, 1, 1;
  w.wv << 1, -1, 2, 0;
  w.wo << 0, 1, 1, 0;
  VectorXd q(2), qpos(2);
  q << 1, 0;
  qpos << 0.1, -0.2;
  MatrixXd src(2, 2), kpos(2, 2);
  src << 1, 0, 0, 1;
  kpos << 0.2, 0.1, -0.1, 0.3;
  const auto out = cross_attention(w, 1, q, src, qpos, kpos, {});

  // query = Wq (q + qpos) = Wq (1.1, -0.2) = (0.7, -0.2)
  // key1 = Wk (1.2, 0.1) = (0.6, 1.3); key2 = Wk (-0.1, 1.3) = (-0.05, 1.2)
  const double l1 = (0.7 * 0.6 - 0.2 * 1.3) / std::sqrt(2.0);
  const double l2 = (0.7 * -0.05 - 0.2 * 1.2) / std::sqrt(2.0);
  const double a1 = std::exp(l1) / (std::exp(l1) + std::exp(l2));
  const double a2 = 1.0 - a1;
  // values: Wv (1,0) = (1, 2); Wv (0,1) = (-1, 0)
  const double c0 = a1 * 1.0 + a2 * -1.0;
  const double c1 = a1 * 2.0 + a2 * 0.0;
  // out = Wo c = (c1, c0)
  EXPECT_NEAR(out(0), c1, 1e-14);
  EXPECT_NEAR(out(1), c0, 1e-14);
}

TEST(CrossAttention, ShapeMismatchThrows) {
  const auto m = init_model(tiny(4, 2, 3), 4);
  EXPECT_THROW(cross_attention(m.params.attn1, 2, VectorXd::Ones(3), MatrixXd::Ones(2, 4), VectorXd::Ones(4),
                               MatrixXd::Ones(2, 4), {}),
               ValidationError);
  EXPECT_THROW(cross_attention(m.params.attn1, 2, VectorXd::Ones(4), MatrixXd::Ones(2, 4), VectorXd::Ones(4),
                               MatrixXd::Ones(2, 4), KeyMask{1}),
               ValidationError);
}

TEST(Forward, ZeroParametersGiveZeroTrajectory) {
  const PlannerModel m{PlannerConfig{}, PlannerParams::zeros(PlannerConfig{})};
  const auto t = forward(m, busy_scenario(1, 4, 4), MetaAction::TurnLeft);
  ASSERT_EQ(t.size(), kFutureSteps);
  for (const auto& p : t.waypoints) EXPECT_EQ(p, Vec2{});
}

TEST(Forward, DeterministicAndFinite) {
  const auto m = init_model(PlannerConfig{}, 5);
  const auto s = busy_scenario(2, 6, 5);
  const auto a = forward(m, s, MetaAction::TurnRight);
  const auto b = forward(m, s, MetaAction::TurnRight);
  EXPECT_EQ(a, b);
  for (const auto& p : a.waypoints) EXPECT_TRUE(p.finite());
}

TEST(Forward, EmptySceneIsPlanHeadOfEgoStateByHand) {
  const auto m = init_model(tiny(2, 1, 3), 6);
  Scenario s = simple_scenario("e", 6.0);
  s.ego.accel = -0.5;
  s.map.clear();
  for (auto cmd : kAllActions) {
    std::vector<double> x = {0, 0, 0, 0, 0.6, -0.05, 1.0, 0, 0, 0};
    x[7 + static_cast<std::size_t>(cmd)] = 1.0;
    const auto y = mlp_by_hand(m.params.plan_head, x);
    const auto t = forward(m, s, cmd);
    for (std::size_t k = 0; k < kFutureSteps; ++k) {
      EXPECT_NEAR(t[k].x, y[2 * k], 1e-14);
      EXPECT_NEAR(t[k].y, y[2 * k + 1], 1e-14);
    }
  }
}

TEST(Forward, SoftmaxRowsSumToOneOverValidKeys) {
  const auto m = init_model(PlannerConfig{}, 7);
  const auto s = busy_scenario(3, 5, 3);
  const auto [t, trace] = forward_traced(m, s, MetaAction::GoStraight);
  ASSERT_EQ(trace.agent_attention.rows(), 2);
  for (Eigen::Index h = 0; h < 2; ++h) {
    EXPECT_NEAR(trace.agent_attention.row(h).sum(), 1.0, 1e-12);
    EXPECT_NEAR(trace.map_attention.row(h).sum(), 1.0, 1e-12);
    for (Eigen::Index j = 5; j < 8; ++j) EXPECT_EQ(trace.agent_attention(h, j), 0.0);
    for (Eigen::Index j = 3; j < 8; ++j) EXPECT_EQ(trace.map_attention(h, j), 0.0);
  }
}

TEST(Forward, PermutingKeysLeavesOutputUnchanged) {
  const auto m = init_model(PlannerConfig{}, 8);
  auto s = busy_scenario(4, 7, 6);
  const auto base = forward(m, s, MetaAction::TurnLeft);
  SplitMix64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = s;
    shuffle(p.agents, rng);
    shuffle(p.map, rng);
    EXPECT_LE(max_abs_diff(base, forward(m, p, MetaAction::TurnLeft)), 1e-9);
  }
}

TEST(Loss, Examples) {
  Trajectory gt(vlad::testing::line_points({}, {1.0, 0.5}, kFutureSteps));
  EXPECT_EQ(imitation_loss(gt, gt), 0.0);
  Trajectory shifted = gt;
  for (auto& p : shifted.waypoints) p = p + Vec2{1.0, 0.0};
  EXPECT_DOUBLE_EQ(imitation_loss(shifted, gt), 1.0);

  SplitMix64 rng(12);
  Trajectory a, b;
  for (std::size_t k = 0; k < kFutureSteps; ++k) {
    a[k] = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
    b[k] = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
  }
  double ref = 0.0;
  for (std::size_t k = 0; k < 6; ++k) ref += std::pow(a[k].x - b[k].x, 2) + std::pow(a[k].y - b[k].y, 2);
  EXPECT_NEAR(imitation_loss(a, b), ref / 6.0, 1e-12);
}

TEST(Backward, ZeroModelZeroTarget) {
  const PlannerModel m{PlannerConfig{}, PlannerParams::zeros(PlannerConfig{})};
  auto s = busy_scenario(5, 3, 3);
  for (auto& p : s.gt_future.waypoints) p = {};
  const auto r = backward(m, s, MetaAction::GoStraight, s.gt_future);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grads.flatten()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, LossMatchesForward) {
  const auto m = init_model(PlannerConfig{}, 9);
  const auto s = busy_scenario(6, 4, 4);
  EXPECT_DOUBLE_EQ(backward(m, s, MetaAction::TurnLeft, s.gt_future).loss,
                   imitation_loss(forward(m, s, MetaAction::TurnLeft), s.gt_future));
}

TEST(Backward, MatchesFiniteDifferencesSmall) {
  for (std::uint64_t seed : {1, 2, 3}) {
    for (auto cfg : {tiny(2, 1, 3), tiny(4, 2, 5)}) {
      const auto m = init_model(cfg, seed);
      const auto s = busy_scenario(seed + 20, 3 + seed, 2 + seed);
      const auto r = vlad::testing::check_gradients(m, s, kAllActions[seed % 3]);
      EXPECT_LE(r.max_rel_error, 1e-4) << "seed " << seed << " d_model " << cfg.d_model << " worst " << r.worst_param;
    }
  }
}

TEST(Backward, MaskedSlotsGetNoGradient) {
  const auto m = init_model(PlannerConfig{}, 10);
  auto s = busy_scenario(7, 0, 3);
  const auto r = backward(m, s, MetaAction::TurnRight, s.gt_future);
  for (const Mlp* g : {&r.grads.agent_enc}) {
    EXPECT_EQ(g->w1.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g->b1.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g->w2.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g->b2.cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_EQ(r.grads.attn1.wq.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.grads.attn1.wo.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(r.grads.attn2.wo.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(r.grads.map_enc.w1.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Train, ZeroLearningRateKeepsParametersAndFlatCurve) {
  const auto m = init_model(PlannerConfig{}, 11);
  std::vector<Scenario> data = {busy_scenario(1, 2, 2), busy_scenario(2, 3, 1)};
  data[1].id = "other";
  RuleOracle oracle;
  const auto r = train(m, data, oracle, 4, 0.0, 3);
  EXPECT_EQ(r.model.params.flatten(), m.params.flatten());
  ASSERT_EQ(r.epoch_loss.size(), 4u);
  for (double l : r.epoch_loss) EXPECT_EQ(l, r.epoch_loss.front());
}

TEST(Train, OverfitsSingleScenario) {
  const auto m = init_model(PlannerConfig{}, 12);
  const std::vector<Scenario> data = {busy_scenario(8, 3, 3)};
  RuleOracle oracle;
  const auto r = train(m, data, oracle, 600, 1e-2, 1);
  EXPECT_LT(r.epoch_loss.back(), 0.01 * r.epoch_loss.front());
}

TEST(Train, SameSeedSameParameters) {
  const auto m = init_model(PlannerConfig{}, 13);
  GenSpec g;
  g.n_scenarios = 20;
  g.seed = 4;
  const auto data = generate(g);
  RuleOracle oracle;
  const auto a = train(m, data, oracle, 3, 1e-2, 5);
  const auto b = train(m, data, oracle, 3, 1e-2, 5);
  EXPECT_EQ(a.model.params.flatten(), b.model.params.flatten());
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  const auto c = train(m, data, oracle, 3, 1e-2, 6);
  EXPECT_NE(a.model.params.flatten(), c.model.params.flatten());
}

TEST(Train, DivergenceIsReported) {
  const auto m = init_model(PlannerConfig{}, 14);
  const std::vector<Scenario> data = {busy_scenario(9, 3, 3)};
  RuleOracle oracle;
  try {
    train(m, data, oracle, 50, 1e6, 1);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("learning rate"), std::string::npos);
  }
  EXPECT_THROW(train(m, {}, oracle, 1, 1e-2, 1), ConfigError);
}

TEST(Checkpoint, RoundTripIsExactAndDeterministic) {
  const auto m = init_model(tiny(4, 2, 3), 15);
  const auto text = checkpoint_to_string(m);
  EXPECT_EQ(text, checkpoint_to_string(m));
  const auto back = checkpoint_from_string(text);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.params.flatten(), m.params.flatten());
  EXPECT_EQ(text.rfind(R"({"version":1,"config":{"a_max":8,"d_model":4,"hidden":3,)", 0), 0u);
  EXPECT_LT(text.find("\"agent_enc.b1\""), text.find("\"ego_query\""));
}

TEST(Checkpoint, RejectsWrongShapesAndNames) {
  const auto m = init_model(tiny(4, 2, 3), 15);
  auto j = Json::parse(checkpoint_to_string(m));
  auto extra = j;
  extra["params"]["bogus"] = j["params"]["ego_query"];
  EXPECT_THROW(checkpoint_from_string(extra.dump()), SchemaError);
  auto missing = j;
  missing["params"].erase("pe2.w1");
  EXPECT_THROW(checkpoint_from_string(missing.dump()), SchemaError);
  auto shape = j;
  shape["params"]["attn1.wq"]["shape"] = Json::array({4, 3});
  EXPECT_THROW(checkpoint_from_string(shape.dump()), SchemaError);
  auto count = j;
  count["params"]["ego_query"]["data"].push_back(1.0);
  EXPECT_THROW(checkpoint_from_string(count.dump()), SchemaError);
  EXPECT_THROW(checkpoint_from_string("{"), SchemaError);
}
