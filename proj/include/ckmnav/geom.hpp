#pragma once

// Spherical approximation of lattice cells and the per-round objectives
// (trajectory length, outage length, newly measured grids).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ckmnav/ckm.hpp"
#include "ckmnav/errors.hpp"
#include "ckmnav/grid.hpp"
#include "ckmnav/vec3.hpp"

namespace ckmnav {

struct Trajectory {
  std::vector<GridIndex> waypoints;
  int round = 0;

  void validate(const GridSpec& spec) const {
    if (waypoints.size() < 2) throw InvalidArgument("trajectory: need at least 2 waypoints");
    for (std::size_t n = 0; n < waypoints.size(); ++n) {
      spec.require(waypoints[n], "trajectory");
      if (n > 0 && waypoints[n] == waypoints[n - 1])
        throw InvalidArgument("trajectory: consecutive waypoints must differ");
    }
  }
};

struct RoundObjectives {
  double t_r = 0.0;      // meters flown
  double o_r = 0.0;      // meters flown inside outage grids
  std::size_t m_r = 0;   // distinct previously unmeasured grids traversed
};

/// Distance from c to the segment a-b (perpendicular when the foot lies on
/// the segment, nearer endpoint otherwise).
inline double point_segment_distance(const Vec3& c, const Vec3& a, const Vec3& b) {
  const Vec3 v = b - a;
  const double vv = dot(v, v);
  if (!(vv > 0.0)) throw InvalidArgument("point_segment_distance: degenerate segment");
  const double t = dot(c - a, v) / vv;
  if (t <= 0.0) return distance(c, a);
  if (t >= 1.0) return distance(c, b);
  return norm(cross(a - c, v)) / std::sqrt(vv);
}

/// Full chord of a sphere of radius r at distance `dist` from its centre.
inline double chord_length(double dist, double r) {
  return dist < r ? 2.0 * std::sqrt(r * r - dist * dist) : 0.0;
}

/// Length of the segment a-b lying inside the sphere (c, r). This is the
/// chord restricted to the segment, so the contributions of disjoint spheres
/// along one segment never sum past the segment length.
inline double clipped_chord_length(const Vec3& c, const Vec3& a, const Vec3& b, double r) {
  const Vec3 v = b - a;
  const double len = norm(v);
  if (!(len > 0.0)) return 0.0;
  const double s0 = dot(c - a, v) / len;  // foot position along the segment
  const double perp = norm(cross(a - c, v)) / len;
  const double d2 = perp * perp;
  if (!(d2 < r * r)) return 0.0;
  const double half = std::sqrt(r * r - d2);
  const double lo = std::max(0.0, s0 - half);
  const double hi = std::min(len, s0 + half);
  return std::max(0.0, hi - lo);
}

struct GridCrossing {
  GridIndex index;
  double dist = 0.0;    // centre-to-segment distance
  double length = 0.0;  // chord of the inscribed sphere inside the segment
};

/// Grids whose inscribed sphere (radius delta/2) the segment a-b enters,
/// i.e. centre-to-segment distance strictly below delta/2. Only the segment's
/// bounding box inflated by one cell is scanned.
inline std::vector<GridCrossing> traversed_grids(const Vec3& a, const Vec3& b,
                                                 const GridSpec& spec) {
  if (a == b) throw InvalidArgument("traversed_grids: degenerate segment");
  const double r = spec.sphere_radius();
  const double d = spec.delta_d;
  auto lo_idx = [&](double p, double origin) { return static_cast<int>(std::floor((p - origin) / d)); };
  auto hi_idx = [&](double p, double origin) { return static_cast<int>(std::ceil((p - origin) / d)) + 1; };
  const int i0 = std::max(1, lo_idx(std::min(a.x, b.x), spec.bounds.x_lo));
  const int i1 = std::min(spec.ni, hi_idx(std::max(a.x, b.x), spec.bounds.x_lo));
  const int j0 = std::max(1, lo_idx(std::min(a.y, b.y), spec.bounds.y_lo));
  const int j1 = std::min(spec.nj, hi_idx(std::max(a.y, b.y), spec.bounds.y_lo));
  const int k0 = std::max(1, lo_idx(std::min(a.z, b.z), spec.bounds.z_lo));
  const int k1 = std::min(spec.nk, hi_idx(std::max(a.z, b.z), spec.bounds.z_lo));
  std::vector<GridCrossing> out;
  for (int k = k0; k <= k1; ++k) {
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const GridIndex g{i, j, k};
        const Vec3 c = spec.center(g);
        const double dist = point_segment_distance(c, a, b);
        if (dist < r) out.push_back({g, dist, clipped_chord_length(c, a, b, r)});
      }
    }
  }
  return out;
}

inline std::vector<GridCrossing> traversed_grids(const GridIndex& a, const GridIndex& b,
                                                 const GridSpec& spec) {
  spec.require(a, "traversed_grids");
  spec.require(b, "traversed_grids");
  if (a == b) throw InvalidArgument("traversed_grids: segment endpoints coincide");
  return traversed_grids(spec.center(a), spec.center(b), spec);
}

/// Distinct grid ids traversed by any segment of the trajectory, ascending.
inline std::vector<std::size_t> traversed_ids(const Trajectory& traj, const GridSpec& spec) {
  std::vector<std::size_t> ids;
  for (std::size_t n = 0; n + 1 < traj.waypoints.size(); ++n) {
    for (const auto& c : traversed_grids(traj.waypoints[n], traj.waypoints[n + 1], spec))
      ids.push_back(spec.linear(c.index));
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

/// T_r, O_r and M_r for one flight. Outage follows the map's current belief;
/// `measured_before` is the mask at round start.
inline RoundObjectives eval_objectives(const Trajectory& traj, const ChannelKnowledgeMap& ckm,
                                       std::span<const std::uint8_t> measured_before) {
  traj.validate(ckm.spec);
  RoundObjectives obj;
  std::vector<std::uint8_t> seen(ckm.size(), 0);
  for (std::size_t n = 0; n + 1 < traj.waypoints.size(); ++n) {
    const Vec3 a = ckm.spec.center(traj.waypoints[n]);
    const Vec3 b = ckm.spec.center(traj.waypoints[n + 1]);
    obj.t_r += distance(a, b);
    for (const auto& c : traversed_grids(a, b, ckm.spec)) {
      const std::size_t id = ckm.spec.linear(c.index);
      if (is_outage(ckm, id)) obj.o_r += c.length;
      if (!measured_before[id] && !seen[id]) {
        seen[id] = 1;
        ++obj.m_r;
      }
    }
  }
  return obj;
}

}  // namespace ckmnav
