#pragma once

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "vlad/scene.hpp"

namespace vlad {

/// Values at the 1 s / 2 s / 3 s horizons plus their mean.
struct HorizonValues {
  double at_1s = 0.0;
  double at_2s = 0.0;
  double at_3s = 0.0;
  double avg = 0.0;

  static HorizonValues from(double a, double b, double c) { return {a, b, c, (a + b + c) / 3.0}; }

  friend bool operator==(const HorizonValues&, const HorizonValues&) = default;
};

/// 1-based waypoint index of each horizon at 2 Hz.
inline constexpr std::array<std::size_t, 3> kHorizonSteps = {2, 4, 6};

struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 1.0;
  double width = 1.0;

  Vec2 axis_u() const noexcept { return {std::cos(heading), std::sin(heading)}; }
  Vec2 axis_v() const noexcept { return {-std::sin(heading), std::cos(heading)}; }

  std::array<Vec2, 4> corners() const noexcept {
    const Vec2 u = (0.5 * length) * axis_u();
    const Vec2 v = (0.5 * width) * axis_v();
    return {center + u + v, center - u + v, center - u - v, center + u - v};
  }

  bool contains(Vec2 p) const noexcept {
    const Vec2 d = p - center;
    return std::abs(d.dot(axis_u())) <= 0.5 * length && std::abs(d.dot(axis_v())) <= 0.5 * width;
  }
};

inline void validate(const OrientedBox& b) {
  if (!b.center.finite() || !std::isfinite(b.heading) || !std::isfinite(b.length) || !std::isfinite(b.width))
    throw ValidationError("box: non-finite field");
  if (b.length <= 0.0 || b.width <= 0.0) throw ValidationError("box: extents must be positive");
}

namespace detail {

inline std::pair<double, double> project(const std::array<Vec2, 4>& pts, Vec2 axis) noexcept {
  double lo = pts[0].dot(axis), hi = lo;
  for (std::size_t i = 1; i < 4; ++i) {
    const double p = pts[i].dot(axis);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  return {lo, hi};
}

}  // namespace detail

/// Separating-axis test over the four edge normals. Touching boxes overlap.
inline bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) noexcept {
  const auto ca = a.corners();
  const auto cb = b.corners();
  for (Vec2 axis : {a.axis_u(), a.axis_v(), b.axis_u(), b.axis_v()}) {
    const auto [alo, ahi] = detail::project(ca, axis);
    const auto [blo, bhi] = detail::project(cb, axis);
    if (ahi < blo || bhi < alo) return false;
  }
  return true;
}

inline HorizonValues l2_horizons(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != kFutureSteps || gt.size() != kFutureSteps)
    throw ValidationError("l2_horizons: trajectories must have " + std::to_string(kFutureSteps) + " waypoints");
  std::array<double, 3> v{};
  for (std::size_t h = 0; h < 3; ++h) v[h] = distance(pred[kHorizonSteps[h] - 1], gt[kHorizonSteps[h] - 1]);
  return HorizonValues::from(v[0], v[1], v[2]);
}

struct Extent {
  double length = 4.5;
  double width = 2.0;
};

/// Per-step ego/agent box overlap along the predicted trajectory.
/// Ego heading at step k follows the segment from the previous waypoint
/// (the start point for k = 1); a segment shorter than 1e-6 m keeps the
/// previous heading. Agents keep their current heading.
inline std::vector<bool> collision_steps(const Trajectory& pred, Extent ego_extent, const std::vector<AgentTrack>& agents,
                                         Vec2 start = {}, double start_heading = 0.0) {
  if (pred.size() != kFutureSteps) throw ValidationError("collision: trajectory must have 6 waypoints");
  for (const auto& a : agents)
    if (a.future.size() != kFutureSteps)
      throw ValidationError("collision: agent " + std::to_string(a.id) + " future length mismatch");
  std::vector<bool> hit(kFutureSteps, false);
  Vec2 prev = start;
  double heading = start_heading;
  for (std::size_t k = 0; k < kFutureSteps; ++k) {
    const Vec2 seg = pred[k] - prev;
    if (seg.norm() >= 1e-6) heading = std::atan2(seg.y, seg.x);
    prev = pred[k];
    const OrientedBox ego{pred[k], heading, ego_extent.length, ego_extent.width};
    for (const auto& a : agents) {
      if (boxes_overlap(ego, {a.future[k], a.heading, a.length, a.width})) {
        hit[k] = true;
        break;
      }
    }
  }
  return hit;
}

/// Per-sample collision indicator (0 or 100) up to each horizon.
inline HorizonValues collision_horizons(const Trajectory& pred, Extent ego_extent, const std::vector<AgentTrack>& agents,
                                        Vec2 start = {}, double start_heading = 0.0) {
  const auto hit = collision_steps(pred, ego_extent, agents, start, start_heading);
  std::array<double, 3> v{};
  bool any = false;
  std::size_t k = 0;
  for (std::size_t h = 0; h < 3; ++h) {
    for (; k < kHorizonSteps[h]; ++k) any = any || hit[k];
    v[h] = any ? 100.0 : 0.0;
  }
  return HorizonValues::from(v[0], v[1], v[2]);
}

/// One row of the displacement / collision table.
struct PlanEvalRow {
  HorizonValues l2;
  HorizonValues collision;
};

/// Dataset means, accumulated in sample order.
class PlanEvalAccumulator {
 public:
  void add(const HorizonValues& l2, const HorizonValues& col) {
    add_to(l2_, l2);
    add_to(col_, col);
    ++n_;
  }

  std::size_t count() const noexcept { return n_; }

  PlanEvalRow mean() const {
    if (n_ == 0) return {};
    const double inv = 1.0 / static_cast<double>(n_);
    auto m = [&](const std::array<double, 3>& s) { return HorizonValues::from(s[0] * inv, s[1] * inv, s[2] * inv); };
    return {m(l2_), m(col_)};
  }

 private:
  static void add_to(std::array<double, 3>& s, const HorizonValues& v) {
    s[0] += v.at_1s;
    s[1] += v.at_2s;
    s[2] += v.at_3s;
  }

  std::array<double, 3> l2_{};
  std::array<double, 3> col_{};
  std::size_t n_ = 0;
};

}  // namespace vlad
