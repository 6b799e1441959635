#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library's algorithms; they share only plain data types.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "ckmnav/ckmnav.hpp"

namespace oracle {

using ckmnav::GridIndex;
using ckmnav::GridSpec;
using ckmnav::Vec3;

inline double gamma(const ckmnav::SemivariogramModel& m, double d) {
  if (d == 0.0) return 0.0;
  return m.nugget + m.partial_sill * (1.0 - std::exp(-d / m.range_m));
}

inline double dist(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

struct Kriging {
  std::vector<double> weights;
  double multiplier = 0.0;
  double variance = 0.0;  // unclamped
};

/// Dense solve of the bordered ordinary-Kriging system, plus r0' R^-1 r0
/// through an explicit inverse.
inline Kriging kriging(const std::vector<Vec3>& pos, const Vec3& target, const ckmnav::SemivariogramModel& m) {
  const int n = static_cast<int>(pos.size());
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::VectorXd r0(n + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) r(i, j) = gamma(m, dist(pos[i], pos[j]));
    r(i, n) = 1.0;
    r(n, i) = 1.0;
    r0(i) = gamma(m, dist(pos[i], target));
  }
  r0(n) = 1.0;
  const Eigen::VectorXd x = r.fullPivLu().solve(r0);
  const Eigen::MatrixXd inv = r.fullPivLu().inverse();
  Kriging k;
  k.weights.assign(x.data(), x.data() + n);
  k.multiplier = -x(n);
  k.variance = r0.dot(inv * r0);
  return k;
}

// --- geometry -------------------------------------------------------------

/// Parameter interval (t0, t1) on which |a + t (b - a) - c| < r, intersected
/// with [0, 1]; empty when t0 >= t1.
inline std::pair<double, double> ball_interval(const Vec3& a, const Vec3& b, const Vec3& c, double r) {
  const double vx = b.x - a.x, vy = b.y - a.y, vz = b.z - a.z;
  const double wx = a.x - c.x, wy = a.y - c.y, wz = a.z - c.z;
  const double qa = vx * vx + vy * vy + vz * vz;
  const double qb = 2.0 * (vx * wx + vy * wy + vz * wz);
  const double qc = wx * wx + wy * wy + wz * wz - r * r;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (!(disc > 0.0)) return {1.0, 0.0};
  const double s = std::sqrt(disc);
  const double t0 = (-qb - s) / (2.0 * qa);
  const double t1 = (-qb + s) / (2.0 * qa);
  return {std::max(0.0, t0), std::min(1.0, t1)};
}

struct Crossing {
  std::size_t id;
  double length;
};

/// Every lattice cell, tested by the quadratic above.
inline std::vector<Crossing> traversed(const Vec3& a, const Vec3& b, const GridSpec& spec) {
  std::vector<Crossing> out;
  const double len = dist(a, b);
  for (std::size_t id = 0; id < spec.size(); ++id) {
    const auto [t0, t1] = ball_interval(a, b, spec.center(id), 0.5 * spec.delta_d);
    if (t0 < t1) out.push_back({id, (t1 - t0) * len});
  }
  return out;
}

/// Exact membership for a segment between two lattice centres, in integer
/// cell units: the open ball of radius 1/2 around c meets the segment.
inline bool lattice_hit(const GridIndex& a, const GridIndex& b, const GridIndex& c) {
  const std::int64_t v[3] = {b.i - a.i, b.j - a.j, b.k - a.k};
  const std::int64_t w[3] = {c.i - a.i, c.j - a.j, c.k - a.k};
  const std::int64_t vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  const std::int64_t wv = w[0] * v[0] + w[1] * v[1] + w[2] * v[2];
  const std::int64_t ww = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
  if (wv <= 0) return 4 * ww < 1;
  if (wv >= vv) {
    const std::int64_t u[3] = {c.i - b.i, c.j - b.j, c.k - b.k};
    return 4 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) < 1;
  }
  // squared perpendicular distance = (ww vv - wv^2) / vv
  return 4 * (ww * vv - wv * wv) < vv;
}

/// T_r, O_r, M_r by a full-lattice scan per segment.
inline ckmnav::RoundObjectives objectives(const ckmnav::Trajectory& traj, const ckmnav::ChannelKnowledgeMap& ckm,
                                          const std::vector<std::uint8_t>& before) {
  ckmnav::RoundObjectives o;
  std::vector<std::uint8_t> seen(ckm.size(), 0);
  const auto& spec = ckm.spec;
  for (std::size_t n = 0; n + 1 < traj.waypoints.size(); ++n) {
    const auto& ga = traj.waypoints[n];
    const auto& gb = traj.waypoints[n + 1];
    const Vec3 a = spec.center(ga), b = spec.center(gb);
    const double len = dist(a, b);
    o.t_r += len;
    for (std::size_t id = 0; id < ckm.size(); ++id) {
      const GridIndex c = spec.index(id);
      if (!lattice_hit(ga, gb, c)) continue;
      const auto [t0, t1] = ball_interval(a, b, spec.center(id), 0.5 * spec.delta_d);
      const double v = ckm.measured[id] ? ckm.truth_sinr_db[id] : ckm.estimate_sinr_db[id];
      if (v < ckm.gamma_th_db) o.o_r += std::max(0.0, t1 - t0) * len;
      if (!before[id] && !seen[id]) {
        seen[id] = 1;
        ++o.m_r;
      }
    }
  }
  return o;
}

// --- graphs ---------------------------------------------------------------

struct Graph {
  std::size_t n = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;
};

/// Explicit 6-neighbour digraph with w_s weights, built from the indicators.
inline Graph lattice_graph(const ckmnav::ChannelKnowledgeMap& ckm, double mu1, double mu2) {
  const auto& spec = ckm.spec;
  const double d = spec.delta_d;
  auto outage = [&](std::size_t id) {
    const double v = ckm.measured[id] ? ckm.truth_sinr_db[id] : ckm.estimate_sinr_db[id];
    return v < ckm.gamma_th_db ? 1.0 : 0.0;
  };
  Graph g;
  g.n = ckm.size();
  g.adj.resize(g.n);
  const int step[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (std::size_t a = 0; a < g.n; ++a) {
    const GridIndex ga = spec.index(a);
    for (const auto& s : step) {
      const GridIndex gb{ga.i + s[0], ga.j + s[1], ga.k + s[2]};
      if (gb.i < 1 || gb.j < 1 || gb.k < 1 || gb.i > spec.ni || gb.j > spec.nj || gb.k > spec.nk) continue;
      const std::size_t b = spec.linear(gb);
      const double w = d + 0.5 * mu1 * d * (outage(a) + outage(b)) + mu2 * d * (ckm.measured[b] ? 0.0 : 1.0);
      g.adj[a].push_back({b, w});
    }
  }
  return g;
}

inline double dijkstra(const Graph& g, std::size_t s, std::size_t e) {
  std::vector<double> best(g.n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  best[s] = 0.0;
  pq.push({0.0, s});
  while (!pq.empty()) {
    const auto [dv, v] = pq.top();
    pq.pop();
    if (dv > best[v]) continue;
    if (v == e) return dv;
    for (const auto& [u, w] : g.adj[v]) {
      if (dv + w < best[u]) {
        best[u] = dv + w;
        pq.push({best[u], u});
      }
    }
  }
  return best[e];
}

/// Minimum weight over every elementary s-e path (exhaustive DFS).
inline double best_simple_path(const Graph& g, std::size_t s, std::size_t e, std::size_t* paths = nullptr) {
  std::vector<std::uint8_t> on(g.n, 0);
  double best = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  std::function<void(std::size_t, double)> dfs = [&](std::size_t v, double w) {
    if (v == e) {
      best = std::min(best, w);
      ++count;
      return;
    }
    on[v] = 1;
    for (const auto& [u, wu] : g.adj[v])
      if (!on[u]) dfs(u, w + wu);
    on[v] = 0;
  };
  dfs(s, 0.0);
  if (paths) *paths = count;
  return best;
}

// --- tours ----------------------------------------------------------------

using Matrix = std::vector<std::vector<double>>;

inline double cycle_weight(const Matrix& w, const std::vector<std::size_t>& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += w[t[i]][t[(i + 1) % t.size()]];
  return s;
}

/// Optimal cycle by enumerating permutations with vertex 0 fixed.
inline std::vector<std::size_t> best_cycle(const Matrix& w) {
  std::vector<std::size_t> perm(w.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto best = perm;
  double bw = cycle_weight(w, perm);
  while (std::next_permutation(perm.begin() + 1, perm.end())) {
    const double c = cycle_weight(w, perm);
    if (c < bw) {
      bw = c;
      best = perm;
    }
  }
  return best;
}

/// Optimal Hamiltonian path from s to e by enumerating the interior order.
inline double best_open_path(const Matrix& w, std::size_t s, std::size_t e) {
  std::vector<std::size_t> mid;
  for (std::size_t v = 0; v < w.size(); ++v)
    if (v != s && v != e) mid.push_back(v);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    std::size_t prev = s;
    for (auto v : mid) {
      c += w[prev][v];
      prev = v;
    }
    c += w[prev][e];
    best = std::min(best, c);
  } while (std::next_permutation(mid.begin(), mid.end()));
  return best;
}

inline bool cycle_has_edge(const std::vector<std::size_t>& t, std::size_t a, std::size_t b) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto x = t[i], y = t[(i + 1) % t.size()];
    if ((x == a && y == b) || (x == b && y == a)) return true;
  }
  return false;
}

// --- measurement selection ------------------------------------------------

/// Summed full-neighbourhood Kriging variance of the unmeasured grids once
/// `extra` is measured as well.
inline double residual(const ckmnav::ChannelKnowledgeMap& ckm, const ckmnav::SemivariogramModel& m,
                       const std::vector<std::size_t>& extra) {
  std::vector<std::uint8_t> flags = ckm.measured;
  for (auto id : extra) flags[id] = 1;
  std::vector<Vec3> pos;
  for (std::size_t id = 0; id < ckm.size(); ++id)
    if (flags[id]) pos.push_back(ckm.spec.center(id));
  double sum = 0.0;
  for (std::size_t id = 0; id < ckm.size(); ++id)
    if (!flags[id]) sum += std::max(0.0, kriging(pos, ckm.spec.center(id), m).variance);
  return sum;
}

}  // namespace oracle
