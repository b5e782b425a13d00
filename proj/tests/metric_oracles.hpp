#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "vlad/metrics/plan_metrics.hpp"
#include "vlad/metrics/text_metrics.hpp"

namespace vlad::testing {

/// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs_brute_force(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
    const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
    if (bits <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < a.size() && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j;
    }
    if (ok) best = bits;
  }
  return best;
}

inline bool in_box(const OrientedBox& b, Vec2 p, double margin) {
  const Vec2 d = p - b.center;
  const double c = std::cos(b.heading), s = std::sin(b.heading);
  const double u = c * d.x + s * d.y, v = -s * d.x + c * d.y;
  return std::abs(u) <= b.length / 2 + margin && std::abs(v) <= b.width / 2 + margin;
}

enum class GridVerdict { Overlap, Separate, Borderline };

/// Samples box `a` on a `step` grid in its own frame (edges included) and
/// tests each point against `b` grown and shrunk by `band`. Pairs whose
/// answer flips inside that band are reported as Borderline.
inline GridVerdict grid_overlap(const OrientedBox& a, const OrientedBox& b, double step = 0.01, double band = 0.01) {
  const double c = std::cos(a.heading), s = std::sin(a.heading);
  const auto nu = static_cast<int>(std::ceil(a.length / step));
  const auto nv = static_cast<int>(std::ceil(a.width / step));
  bool grown = false, shrunk = false;
  for (int i = 0; i <= nu && !shrunk; ++i) {
    const double u = -a.length / 2 + std::min(a.length, i * step);
    for (int j = 0; j <= nv; ++j) {
      const double v = -a.width / 2 + std::min(a.width, j * step);
      const Vec2 p{a.center.x + c * u - s * v, a.center.y + s * u + c * v};
      if (in_box(b, p, band)) {
        grown = true;
        if (in_box(b, p, -band)) {
          shrunk = true;
          break;
        }
      }
    }
  }
  if (shrunk) return GridVerdict::Overlap;
  if (!grown) return GridVerdict::Separate;
  return GridVerdict::Borderline;
}

}  // namespace vlad::testing
