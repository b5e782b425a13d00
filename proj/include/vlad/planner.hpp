#pragma once

// Command-conditioned vectorized planner: a learnable ego query attends to
// agent queries, then to map queries; a planning head decodes both fused
// ego features, the ego state and the one-hot command into waypoints.
// Forward and reverse mode are written out by hand.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vlad/errors.hpp"
#include "vlad/rng.hpp"
#include "vlad/scene.hpp"

namespace vlad {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Metric inputs (positions, speeds, extents, accel) are multiplied by this
/// before entering any network; keeps tanh units out of saturation.
inline constexpr double kInputScale = 0.1;

inline constexpr int kAgentFeatureDim = 7;
inline constexpr int kMapFeatureDim = 2 * static_cast<int>(kPolylinePoints);
inline constexpr int kEgoStateDim = 3;
inline constexpr int kCommandDim = 3;

struct PlannerConfig {
  int d_model = 32;
  int n_heads = 2;
  int hidden = 64;
  std::size_t t_f = kFutureSteps;
  std::size_t a_max = kMaxAgents;
  std::size_t m_max = kMaxPolylines;
  std::size_t p_m = kPolylinePoints;

  int head_dim() const noexcept { return d_model / n_heads; }
  int head_input_dim() const noexcept { return 2 * d_model + kEgoStateDim + kCommandDim; }
  int head_output_dim() const noexcept { return static_cast<int>(2 * t_f); }

  void validate() const {
    if (d_model <= 0 || n_heads <= 0 || hidden <= 0) throw ConfigError("planner: sizes must be positive");
    if (d_model % n_heads != 0) throw ConfigError("planner: d_model must be divisible by n_heads");
    if (t_f != kFutureSteps) throw ConfigError("planner: t_f must equal " + std::to_string(kFutureSteps));
    if (a_max != kMaxAgents || m_max != kMaxPolylines || p_m != kPolylinePoints)
      throw ConfigError("planner: a_max/m_max/p_m must match the scene budgets");
  }

  friend bool operator==(const PlannerConfig&, const PlannerConfig&) = default;
};

/// Two-layer perceptron y = W2 tanh(W1 x + b1) + b2.
struct Mlp {
  MatrixXd w1;
  VectorXd b1;
  MatrixXd w2;
  VectorXd b2;

  static Mlp zeros(int in, int hidden, int out) {
    return {MatrixXd::Zero(hidden, in), VectorXd::Zero(hidden), MatrixXd::Zero(out, hidden), VectorXd::Zero(out)};
  }

  int input_dim() const noexcept { return static_cast<int>(w1.cols()); }
};

/// Projection set of one cross-attention stage; all d_model x d_model.
struct AttentionWeights {
  MatrixXd wq;
  MatrixXd wk;
  MatrixXd wv;
  MatrixXd wo;

  static AttentionWeights zeros(int d) {
    return {MatrixXd::Zero(d, d), MatrixXd::Zero(d, d), MatrixXd::Zero(d, d), MatrixXd::Zero(d, d)};
  }
};

/// Every learnable array, by name. Also used as the gradient container.
struct PlannerParams {
  VectorXd ego_query;
  Mlp agent_enc;
  Mlp map_enc;
  Mlp pe1;
  Mlp pe2;
  AttentionWeights attn1;
  AttentionWeights attn2;
  Mlp plan_head;

  static PlannerParams zeros(const PlannerConfig& c) {
    PlannerParams p;
    p.ego_query = VectorXd::Zero(c.d_model);
    p.agent_enc = Mlp::zeros(kAgentFeatureDim, c.hidden, c.d_model);
    p.map_enc = Mlp::zeros(kMapFeatureDim, c.hidden, c.d_model);
    p.pe1 = Mlp::zeros(2, c.hidden, c.d_model);
    p.pe2 = Mlp::zeros(2, c.hidden, c.d_model);
    p.attn1 = AttentionWeights::zeros(c.d_model);
    p.attn2 = AttentionWeights::zeros(c.d_model);
    p.plan_head = Mlp::zeros(c.head_input_dim(), c.hidden, c.head_output_dim());
    return p;
  }

  /// Calls f(name, array) for every parameter in the canonical order used by
  /// initialization. Arrays are MatrixXd or VectorXd.
  template <class Self, class F>
  static void visit(Self& p, F&& f) {
    f("ego_query", p.ego_query);
    auto mlp = [&](std::string_view prefix, auto& m) {
      const std::string s(prefix);
      f(s + ".w1", m.w1);
      f(s + ".b1", m.b1);
      f(s + ".w2", m.w2);
      f(s + ".b2", m.b2);
    };
    auto attn = [&](std::string_view prefix, auto& a) {
      const std::string s(prefix);
      f(s + ".wq", a.wq);
      f(s + ".wk", a.wk);
      f(s + ".wv", a.wv);
      f(s + ".wo", a.wo);
    };
    mlp("agent_enc", p.agent_enc);
    mlp("map_enc", p.map_enc);
    mlp("pe1", p.pe1);
    mlp("pe2", p.pe2);
    attn("attn1", p.attn1);
    attn("attn2", p.attn2);
    mlp("plan_head", p.plan_head);
  }

  template <class F>
  void for_each(F&& f) { visit(*this, std::forward<F>(f)); }
  template <class F>
  void for_each(F&& f) const { visit(*this, std::forward<F>(f)); }

  std::size_t size() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const auto& a) { n += static_cast<std::size_t>(a.size()); });
    return n;
  }

  /// Flattened copy in canonical order, row-major within each array.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for_each([&](const std::string&, const auto& a) {
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) out.push_back(a(r, c));
    });
    return out;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const auto& a) { ok = ok && a.allFinite(); });
    return ok;
  }
};

using GradientSet = PlannerParams;

struct PlannerModel {
  PlannerConfig config;
  PlannerParams params;
};

/// Weights uniform in +-sqrt(1/fan_in), drawn in canonical parameter order
/// and row-major within each array; biases zero. The ego query uses
/// fan_in = d_model.
inline PlannerModel init_model(const PlannerConfig& config, std::uint64_t seed) {
  config.validate();
  PlannerModel m{config, PlannerParams::zeros(config)};
  SplitMix64 rng(seed);
  m.params.for_each([&](const std::string& name, auto& a) {
    const bool is_bias = name.ends_with(".b1") || name.ends_with(".b2");
    if (is_bias) return;
    const double fan_in = name == "ego_query" ? config.d_model : static_cast<double>(a.cols());
    const double bound = std::sqrt(1.0 / fan_in);
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = rng.uniform(-bound, bound);
  });
  return m;
}

/// Per-key validity; an empty mask means every key is valid.
using KeyMask = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// MLP

struct MlpCache {
  VectorXd input;
  VectorXd hidden;
};

inline VectorXd mlp_forward(const Mlp& m, const VectorXd& x, MlpCache* cache = nullptr) {
  VectorXd h = (m.w1 * x + m.b1).array().tanh().matrix();
  VectorXd y = m.w2 * h + m.b2;
  if (cache) *cache = {x, std::move(h)};
  return y;
}

/// Accumulates parameter gradients into `grad`; returns dL/dx.
inline VectorXd mlp_backward(const Mlp& m, const MlpCache& cache, const VectorXd& dy, Mlp& grad) {
  grad.w2.noalias() += dy * cache.hidden.transpose();
  grad.b2 += dy;
  const VectorXd dh = m.w2.transpose() * dy;
  const VectorXd dz = (dh.array() * (1.0 - cache.hidden.array().square())).matrix();
  grad.w1.noalias() += dz * cache.input.transpose();
  grad.b1 += dz;
  return m.w1.transpose() * dz;
}

// ---------------------------------------------------------------------------
// Cross-attention

struct AttentionCache {
  VectorXd query_in;    ///< q_in + q_pos
  VectorXd query;       ///< projected query
  MatrixXd key_in;      ///< rows: key + key_pos
  MatrixXd keys;        ///< projected keys, one row per key
  MatrixXd source;      ///< raw key/value rows
  MatrixXd values;      ///< projected values, one row per key
  MatrixXd weights;     ///< n_heads x N softmax weights (0 for masked keys)
  VectorXd concat;      ///< concatenated head outputs before W_O
  std::vector<std::size_t> valid;
  int n_heads = 1;
};

inline bool key_valid(const KeyMask& mask, std::size_t j) { return mask.empty() || mask[j] != 0; }

/// Multi-head scaled dot-product attention of one query over N keys.
/// Queries and keys carry additive positional embeddings before projection;
/// values do not. Masked keys are excluded from the softmax. With no valid
/// key the result is the zero vector.
inline VectorXd cross_attention(const AttentionWeights& w, int n_heads, const VectorXd& q_in, const MatrixXd& source,
                                const VectorXd& q_pos, const MatrixXd& k_pos, const KeyMask& mask,
                                AttentionCache* cache = nullptr) {
  const Eigen::Index d = w.wq.rows();
  const auto n = static_cast<std::size_t>(source.rows());
  if (q_in.size() != d || q_pos.size() != d || source.cols() != d || k_pos.rows() != source.rows() ||
      k_pos.cols() != d || (!mask.empty() && mask.size() != n) || n_heads <= 0 || d % n_heads != 0)
    throw ValidationError("cross_attention: shape mismatch");

  std::vector<std::size_t> valid;
  for (std::size_t j = 0; j < n; ++j)
    if (key_valid(mask, j)) valid.push_back(j);

  const Eigen::Index dh = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  VectorXd query_in = q_in + q_pos;
  VectorXd query = w.wq * query_in;
  MatrixXd key_in = source + k_pos;
  MatrixXd keys = key_in * w.wk.transpose();
  MatrixXd values = source * w.wv.transpose();
  MatrixXd weights = MatrixXd::Zero(n_heads, static_cast<Eigen::Index>(n));
  VectorXd concat = VectorXd::Zero(d);

  if (!valid.empty()) {
    for (int h = 0; h < n_heads; ++h) {
      const Eigen::Index off = h * dh;
      std::vector<double> logits(valid.size());
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < valid.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(valid[i]);
        logits[i] = query.segment(off, dh).dot(keys.row(j).segment(off, dh)) * inv_sqrt;
        mx = std::max(mx, logits[i]);
      }
      double z = 0.0;
      for (double& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t i = 0; i < valid.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(valid[i]);
        const double a = logits[i] / z;
        weights(h, j) = a;
        concat.segment(off, dh) += a * values.row(j).segment(off, dh).transpose();
      }
    }
  }

  VectorXd out = valid.empty() ? VectorXd::Zero(d) : VectorXd(w.wo * concat);
  if (cache) {
    *cache = {std::move(query_in), std::move(query),   std::move(key_in), std::move(keys), source,
              std::move(values),   std::move(weights), std::move(concat), std::move(valid), n_heads};
  }
  return out;
}

struct AttentionGrad {
  VectorXd d_query_in;  ///< applies to both q_in and q_pos
  MatrixXd d_source;    ///< key/value rows
  MatrixXd d_key_pos;
};

inline AttentionGrad cross_attention_backward(const AttentionWeights& w, const AttentionCache& c, const VectorXd& dout,
                                              AttentionWeights& grad) {
  const Eigen::Index d = w.wq.rows();
  const Eigen::Index n = c.source.rows();
  AttentionGrad g{VectorXd::Zero(d), MatrixXd::Zero(n, d), MatrixXd::Zero(n, d)};
  if (c.valid.empty()) return g;

  const Eigen::Index dh = d / c.n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  grad.wo.noalias() += dout * c.concat.transpose();
  const VectorXd d_concat = w.wo.transpose() * dout;

  VectorXd d_query = VectorXd::Zero(d);
  MatrixXd d_keys = MatrixXd::Zero(n, d);
  MatrixXd d_values = MatrixXd::Zero(n, d);
  for (int h = 0; h < c.n_heads; ++h) {
    const Eigen::Index off = h * dh;
    const auto dout_h = d_concat.segment(off, dh);
    std::vector<double> d_weight(c.valid.size());
    double weighted = 0.0;
    for (std::size_t i = 0; i < c.valid.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(c.valid[i]);
      d_weight[i] = dout_h.dot(c.values.row(j).segment(off, dh));
      weighted += c.weights(h, j) * d_weight[i];
      d_values.row(j).segment(off, dh) += c.weights(h, j) * dout_h.transpose();
    }
    for (std::size_t i = 0; i < c.valid.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(c.valid[i]);
      const double d_logit = c.weights(h, j) * (d_weight[i] - weighted) * inv_sqrt;
      d_query.segment(off, dh) += d_logit * c.keys.row(j).segment(off, dh).transpose();
      d_keys.row(j).segment(off, dh) += d_logit * c.query.segment(off, dh).transpose();
    }
  }

  grad.wq.noalias() += d_query * c.query_in.transpose();
  g.d_query_in = w.wq.transpose() * d_query;
  grad.wk.noalias() += d_keys.transpose() * c.key_in;
  grad.wv.noalias() += d_values.transpose() * c.source;
  g.d_key_pos = d_keys * w.wk;
  g.d_source = g.d_key_pos + d_values * w.wv;
  return g;
}

// ---------------------------------------------------------------------------
// Scene encoding

inline VectorXd agent_feature(const AgentTrack& a) {
  VectorXd f(kAgentFeatureDim);
  f << kInputScale * a.position.x, kInputScale * a.position.y, std::cos(a.heading), std::sin(a.heading),
      kInputScale * a.speed, kInputScale * a.length, kInputScale * a.width;
  return f;
}

inline VectorXd polyline_feature(const MapPolyline& m) {
  VectorXd f(kMapFeatureDim);
  for (std::size_t i = 0; i < kPolylinePoints; ++i) {
    f(2 * static_cast<Eigen::Index>(i)) = kInputScale * m.points[i].x;
    f(2 * static_cast<Eigen::Index>(i) + 1) = kInputScale * m.points[i].y;
  }
  return f;
}

inline VectorXd position_input(Vec2 p) {
  VectorXd v(2);
  v << kInputScale * p.x, kInputScale * p.y;
  return v;
}

/// (speed, accel, 1), metric terms scaled.
inline VectorXd ego_state_input(const EgoState& e) {
  VectorXd v(kEgoStateDim);
  v << kInputScale * e.speed, kInputScale * e.accel, 1.0;
  return v;
}

inline VectorXd command_one_hot(MetaAction c) {
  VectorXd v = VectorXd::Zero(kCommandDim);
  v(static_cast<Eigen::Index>(c)) = 1.0;
  return v;
}

struct SceneEncoding {
  MatrixXd agent_queries;  ///< a_max x d_model, zero rows for absent agents
  KeyMask agent_mask;
  MatrixXd map_queries;    ///< m_max x d_model
  KeyMask map_mask;
};

struct EncodeCache {
  std::vector<MlpCache> agent_enc;  ///< per valid slot
  std::vector<MlpCache> map_enc;
};

inline SceneEncoding encode_scene(const PlannerModel& model, const Scenario& s, EncodeCache* cache = nullptr) {
  const auto& c = model.config;
  SceneEncoding e{MatrixXd::Zero(static_cast<Eigen::Index>(c.a_max), c.d_model), KeyMask(c.a_max, 0),
                  MatrixXd::Zero(static_cast<Eigen::Index>(c.m_max), c.d_model), KeyMask(c.m_max, 0)};
  if (s.agents.size() > c.a_max || s.map.size() > c.m_max) throw ValidationError("encode_scene: query budget exceeded");
  if (cache) {
    cache->agent_enc.assign(s.agents.size(), {});
    cache->map_enc.assign(s.map.size(), {});
  }
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    e.agent_queries.row(static_cast<Eigen::Index>(i)) =
        mlp_forward(model.params.agent_enc, agent_feature(s.agents[i]), cache ? &cache->agent_enc[i] : nullptr);
    e.agent_mask[i] = 1;
  }
  for (std::size_t i = 0; i < s.map.size(); ++i) {
    e.map_queries.row(static_cast<Eigen::Index>(i)) =
        mlp_forward(model.params.map_enc, polyline_feature(s.map[i]), cache ? &cache->map_enc[i] : nullptr);
    e.map_mask[i] = 1;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Forward / backward

/// Introspection of one forward pass.
struct ForwardTrace {
  VectorXd ego_after_agents;  ///< Q'_ego
  VectorXd ego_after_map;     ///< Q''_ego
  MatrixXd agent_attention;   ///< n_heads x a_max
  MatrixXd map_attention;     ///< n_heads x m_max
};

struct ForwardCache {
  EncodeCache encode;
  SceneEncoding encoding;
  MlpCache pe1_ego;
  MlpCache pe2_ego;
  std::vector<MlpCache> pe1_agents;
  std::vector<MlpCache> pe2_map;
  AttentionCache attn1;
  AttentionCache attn2;
  MlpCache head;
};

namespace detail {

inline Trajectory run_forward(const PlannerModel& model, const Scenario& s, MetaAction command, ForwardCache& fc) {
  const auto& p = model.params;
  const auto& c = model.config;
  fc.encoding = encode_scene(model, s, &fc.encode);

  const VectorXd ego_pos = position_input(s.ego.position);
  const VectorXd qpos1 = mlp_forward(p.pe1, ego_pos, &fc.pe1_ego);
  const VectorXd qpos2 = mlp_forward(p.pe2, ego_pos, &fc.pe2_ego);

  MatrixXd kpos1 = MatrixXd::Zero(static_cast<Eigen::Index>(c.a_max), c.d_model);
  fc.pe1_agents.assign(s.agents.size(), {});
  for (std::size_t i = 0; i < s.agents.size(); ++i)
    kpos1.row(static_cast<Eigen::Index>(i)) = mlp_forward(p.pe1, position_input(s.agents[i].position), &fc.pe1_agents[i]);

  MatrixXd kpos2 = MatrixXd::Zero(static_cast<Eigen::Index>(c.m_max), c.d_model);
  fc.pe2_map.assign(s.map.size(), {});
  for (std::size_t i = 0; i < s.map.size(); ++i)
    kpos2.row(static_cast<Eigen::Index>(i)) = mlp_forward(p.pe2, position_input(s.map[i].points.front()), &fc.pe2_map[i]);

  const VectorXd q1 = cross_attention(p.attn1, c.n_heads, p.ego_query, fc.encoding.agent_queries, qpos1, kpos1,
                                      fc.encoding.agent_mask, &fc.attn1);
  const VectorXd q2 =
      cross_attention(p.attn2, c.n_heads, q1, fc.encoding.map_queries, qpos2, kpos2, fc.encoding.map_mask, &fc.attn2);

  VectorXd head_in(c.head_input_dim());
  head_in << q1, q2, ego_state_input(s.ego), command_one_hot(command);
  const VectorXd out = mlp_forward(p.plan_head, head_in, &fc.head);

  Trajectory t;
  for (std::size_t k = 0; k < c.t_f; ++k) {
    const auto i = static_cast<Eigen::Index>(2 * k);
    t[k] = {out(i), out(i + 1)};
  }
  return t;
}

}  // namespace detail

inline Trajectory forward(const PlannerModel& model, const Scenario& scenario, MetaAction command) {
  ForwardCache fc;
  return detail::run_forward(model, scenario, command, fc);
}

inline std::pair<Trajectory, ForwardTrace> forward_traced(const PlannerModel& model, const Scenario& scenario,
                                                          MetaAction command) {
  ForwardCache fc;
  Trajectory t = detail::run_forward(model, scenario, command, fc);
  const int d = model.config.d_model;
  ForwardTrace tr{fc.head.input.head(d), fc.head.input.segment(d, d), fc.attn1.weights, fc.attn2.weights};
  return {std::move(t), std::move(tr)};
}

/// Mean squared waypoint distance.
inline double imitation_loss(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size() || pred.size() != kFutureSteps)
    throw ValidationError("imitation_loss: trajectories must have " + std::to_string(kFutureSteps) + " waypoints");
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const Vec2 e = pred[k] - gt[k];
    sum += e.dot(e);
  }
  return sum / static_cast<double>(pred.size());
}

struct BackwardResult {
  double loss = 0.0;
  GradientSet grads;
};

/// Exact reverse-mode gradient of imitation_loss(forward(...), gt).
inline BackwardResult backward(const PlannerModel& model, const Scenario& s, MetaAction command, const Trajectory& gt) {
  const auto& p = model.params;
  const auto& c = model.config;
  ForwardCache fc;
  const Trajectory pred = detail::run_forward(model, s, command, fc);
  BackwardResult r{imitation_loss(pred, gt), PlannerParams::zeros(c)};
  GradientSet& g = r.grads;

  VectorXd d_out(c.head_output_dim());
  const double scale = 2.0 / static_cast<double>(c.t_f);
  for (std::size_t k = 0; k < c.t_f; ++k) {
    const auto i = static_cast<Eigen::Index>(2 * k);
    d_out(i) = scale * (pred[k].x - gt[k].x);
    d_out(i + 1) = scale * (pred[k].y - gt[k].y);
  }

  const VectorXd d_head_in = mlp_backward(p.plan_head, fc.head, d_out, g.plan_head);
  VectorXd d_q1 = d_head_in.head(c.d_model);
  const VectorXd d_q2 = d_head_in.segment(c.d_model, c.d_model);

  const AttentionGrad g2 = cross_attention_backward(p.attn2, fc.attn2, d_q2, g.attn2);
  d_q1 += g2.d_query_in;
  mlp_backward(p.pe2, fc.pe2_ego, g2.d_query_in, g.pe2);
  for (std::size_t i = 0; i < s.map.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    mlp_backward(p.map_enc, fc.encode.map_enc[i], g2.d_source.row(row).transpose(), g.map_enc);
    mlp_backward(p.pe2, fc.pe2_map[i], g2.d_key_pos.row(row).transpose(), g.pe2);
  }

  const AttentionGrad g1 = cross_attention_backward(p.attn1, fc.attn1, d_q1, g.attn1);
  g.ego_query += g1.d_query_in;
  mlp_backward(p.pe1, fc.pe1_ego, g1.d_query_in, g.pe1);
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    mlp_backward(p.agent_enc, fc.encode.agent_enc[i], g1.d_source.row(row).transpose(), g.agent_enc);
    mlp_backward(p.pe1, fc.pe1_agents[i], g1.d_key_pos.row(row).transpose(), g.pe1);
  }
  return r;
}

}  // namespace vlad
