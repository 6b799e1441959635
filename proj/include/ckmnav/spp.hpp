#pragma once

// Shortest-path planning on the directed 6-neighbour lattice digraph. Edge
// (a, b) costs one step of length, half an outage penalty per outage
// endpoint, and a (non-positive) reward when b is still unmeasured.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "ckmnav/ckm.hpp"
#include "ckmnav/errors.hpp"
#include "ckmnav/geom.hpp"
#include "ckmnav/grid.hpp"
#include "ckmnav/random.hpp"

namespace ckmnav {

struct SppWeights {
  double mu1 = 0.0;  // outage weight, >= 0
  double mu2 = 0.0;  // measurement reward, <= 0

  void validate() const {
    if (!(mu1 >= 0.0)) throw InvalidArgument("spp: mu1 must be >= 0");
    if (!(mu2 <= 0.0)) throw InvalidArgument("spp: mu2 must be <= 0");
  }
};

enum class SppMode { automatic, floyd, bellman_ford, prize_greedy };

inline std::string to_string(SppMode m) {
  switch (m) {
    case SppMode::automatic: return "automatic";
    case SppMode::floyd: return "floyd";
    case SppMode::bellman_ford: return "bellman_ford";
    case SppMode::prize_greedy: return "prize_greedy";
  }
  return "unknown";
}

inline SppMode parse_spp_mode(const std::string& s) {
  if (s == "automatic" || s == "auto") return SppMode::automatic;
  if (s == "floyd") return SppMode::floyd;
  if (s == "bellman_ford") return SppMode::bellman_ford;
  if (s == "prize_greedy") return SppMode::prize_greedy;
  throw InvalidArgument("unknown spp mode '" + s + "'");
}

struct SppOptions {
  SppMode mode = SppMode::automatic;  // automatic: prize_greedy if mu2 < 0, else bellman_ford
  std::size_t beam_width = 64;
  double budget_factor = 2.0;  // prize_greedy step budget as a multiple of the L1 distance
  std::size_t floyd_max_vertices = 20000;
};

struct SppPlan {
  Trajectory trajectory;
  double total_weight = 0.0;
  SppMode solver_mode = SppMode::bellman_ford;
  bool fallback = false;  // prize_greedy found no path and the exact mu2 = 0 plan was used
};

/// Implicit weighted lattice digraph with indicator snapshots taken at
/// construction (the map is frozen for the duration of a plan).
class LatticeDigraph {
 public:
  LatticeDigraph(const ChannelKnowledgeMap& ckm, const SppWeights& w)
      : spec_(ckm.spec), delta_(ckm.spec.delta_d), mu1_(w.mu1), mu2_(w.mu2),
        outage_(ckm.size()), unmeasured_(ckm.size()) {
    for (std::size_t id = 0; id < ckm.size(); ++id) {
      outage_[id] = is_outage(ckm, id) ? 1 : 0;
      unmeasured_[id] = ckm.is_measured(id) ? 0 : 1;
    }
  }

  std::size_t size() const { return outage_.size(); }
  const GridSpec& spec() const { return spec_; }

  double weight(std::size_t a, std::size_t b) const {
    return delta_ + 0.5 * mu1_ * delta_ * outage_[a] + 0.5 * mu1_ * delta_ * outage_[b] +
           mu2_ * delta_ * unmeasured_[b];
  }

  /// Calls fn(neighbor_id) in ascending id order.
  template <class Fn>
  void for_each_neighbor(std::size_t id, Fn&& fn) const {
    const GridIndex g = spec_.index(id);
    const auto ni = static_cast<std::size_t>(spec_.ni);
    const std::size_t layer = ni * static_cast<std::size_t>(spec_.nj);
    if (g.k > 1) fn(id - layer);
    if (g.j > 1) fn(id - ni);
    if (g.i > 1) fn(id - 1);
    if (g.i < spec_.ni) fn(id + 1);
    if (g.j < spec_.nj) fn(id + ni);
    if (g.k < spec_.nk) fn(id + layer);
  }

 private:
  GridSpec spec_;
  double delta_;
  double mu1_, mu2_;
  std::vector<std::uint8_t> outage_;
  std::vector<std::uint8_t> unmeasured_;
};

/// w_s(a, b) for lattice-adjacent a, b.
inline double edge_weight(const GridIndex& a, const GridIndex& b, const ChannelKnowledgeMap& ckm,
                          const SppWeights& w) {
  ckm.spec.require(a, "edge_weight");
  ckm.spec.require(b, "edge_weight");
  if (manhattan(a, b) != 1) throw InvalidArgument("edge_weight: grids are not lattice-adjacent");
  const double d = ckm.spec.delta_d;
  const std::size_t ia = ckm.spec.linear(a), ib = ckm.spec.linear(b);
  return d + 0.5 * w.mu1 * d * (is_outage(ckm, ia) ? 1.0 : 0.0) +
         0.5 * w.mu1 * d * (is_outage(ckm, ib) ? 1.0 : 0.0) +
         w.mu2 * d * (ckm.is_measured(ib) ? 0.0 : 1.0);
}

namespace detail {

inline double relax_eps(double delta) { return 1e-12 * std::max(1.0, delta); }

// Queue-based Bellman-Ford toward `target` on the reversed graph. Returns
// false when a negative cycle is detected.
inline bool distances_to(const LatticeDigraph& g, std::size_t target, std::vector<double>& dist) {
  const std::size_t n = g.size();
  const double inf = std::numeric_limits<double>::infinity();
  const double eps = relax_eps(g.spec().delta_d);
  dist.assign(n, inf);
  std::vector<std::size_t> hops(n, 0);
  std::vector<std::uint8_t> queued(n, 0);
  std::deque<std::size_t> queue;
  dist[target] = 0.0;
  queue.push_back(target);
  queued[target] = 1;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    queued[u] = 0;
    g.for_each_neighbor(u, [&](std::size_t v) {
      const double cand = g.weight(v, u) + dist[u];
      if (cand < dist[v] - eps) {
        dist[v] = cand;
        hops[v] = hops[u] + 1;
        if (hops[v] >= n) throw NegativeCycleError("");
        if (!queued[v]) {
          queued[v] = 1;
          queue.push_back(v);
        }
      }
    });
  }
  return true;
}

// Deterministic simple path along tight edges (w(u,v) + d[v] == d[u]),
// depth-first with ascending successor ids.
inline std::vector<std::size_t> tight_path(const LatticeDigraph& g, const std::vector<double>& dist,
                                           std::size_t source, std::size_t target) {
  const std::size_t n = g.size();
  std::vector<std::uint8_t> visited(n, 0);
  std::vector<std::size_t> path{source};
  std::vector<std::vector<std::size_t>> pending;
  auto tight_succ = [&](std::size_t u) {
    std::vector<std::size_t> out;
    const double tol = 1e-9 * std::max({1.0, std::abs(dist[u]), g.spec().delta_d});
    g.for_each_neighbor(u, [&](std::size_t v) {
      if (visited[v] || !std::isfinite(dist[v])) return;
      if (std::abs(g.weight(u, v) + dist[v] - dist[u]) <= tol) out.push_back(v);
    });
    std::reverse(out.begin(), out.end());  // pop_back yields ascending order
    return out;
  };
  visited[source] = 1;
  pending.push_back(tight_succ(source));
  while (!path.empty() && path.back() != target) {
    auto& options = pending.back();
    while (!options.empty() && visited[options.back()]) options.pop_back();
    if (options.empty()) {
      pending.pop_back();
      path.pop_back();
      continue;
    }
    const std::size_t next = options.back();
    options.pop_back();
    visited[next] = 1;
    path.push_back(next);
    pending.push_back(tight_succ(next));
  }
  if (path.empty()) throw Error("spp: failed to reconstruct a shortest path");
  return path;
}

inline Trajectory to_trajectory(const GridSpec& spec, const std::vector<std::size_t>& ids) {
  Trajectory t;
  t.waypoints.reserve(ids.size());
  for (auto id : ids) t.waypoints.push_back(spec.index(id));
  return t;
}

inline double path_weight(const LatticeDigraph& g, const std::vector<std::size_t>& ids) {
  double w = 0.0;
  for (std::size_t n = 0; n + 1 < ids.size(); ++n) w += g.weight(ids[n], ids[n + 1]);
  return w;
}

}  // namespace detail

/// True iff the weighted lattice digraph contains a negative-weight cycle.
inline bool detect_negative_cycle(const ChannelKnowledgeMap& ckm, const SppWeights& w) {
  w.validate();
  const LatticeDigraph g(ckm, w);
  const std::size_t n = g.size();
  // Cheap exits: non-negative weights, or a negative 2-cycle.
  bool any_negative = false;
  bool two_cycle = false;
  for (std::size_t u = 0; u < n && !two_cycle; ++u) {
    g.for_each_neighbor(u, [&](std::size_t v) {
      const double wuv = g.weight(u, v);
      if (wuv < 0.0) any_negative = true;
      if (u < v && wuv + g.weight(v, u) < 0.0) two_cycle = true;
    });
  }
  if (two_cycle) return true;
  if (!any_negative) return false;

  // Bellman-Ford from a virtual source connected to every vertex.
  const double eps = detail::relax_eps(ckm.spec.delta_d);
  std::vector<double> dist(n, 0.0);
  std::vector<std::size_t> hops(n, 0);
  std::vector<std::uint8_t> queued(n, 1);
  std::deque<std::size_t> queue;
  for (std::size_t v = 0; v < n; ++v) queue.push_back(v);
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    queued[u] = 0;
    bool found = false;
    g.for_each_neighbor(u, [&](std::size_t v) {
      const double cand = dist[u] + g.weight(u, v);
      if (cand < dist[v] - eps) {
        dist[v] = cand;
        hops[v] = hops[u] + 1;
        if (hops[v] >= n) found = true;
        if (!queued[v]) {
          queued[v] = 1;
          queue.push_back(v);
        }
      }
    });
    if (found) return true;
  }
  return false;
}

namespace detail {

inline SppPlan plan_exact(const LatticeDigraph& g, std::size_t s, std::size_t e, SppMode mode,
                          const SppOptions& opt) {
  std::vector<double> dist;
  if (mode == SppMode::floyd) {
    const std::size_t n = g.size();
    if (n > opt.floyd_max_vertices)
      throw InvalidArgument("spp: floyd mode limited to " + std::to_string(opt.floyd_max_vertices) +
                            " vertices");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(n * n, inf);
    for (std::size_t u = 0; u < n; ++u) {
      d[u * n + u] = 0.0;
      g.for_each_neighbor(u, [&](std::size_t v) { d[u * n + v] = g.weight(u, v); });
    }
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double dik = d[i * n + k];
        if (dik == inf) continue;
        const double* row_k = &d[k * n];
        double* row_i = &d[i * n];
        for (std::size_t j = 0; j < n; ++j) {
          const double c = dik + row_k[j];
          if (c < row_i[j]) row_i[j] = c;
        }
      }
    }
    for (std::size_t v = 0; v < n; ++v)
      if (d[v * n + v] < 0.0)
        throw NegativeCycleError(
            "spp: negative cycle in lattice graph; use prize_greedy or a smaller |mu2|");
    dist.resize(n);
    for (std::size_t v = 0; v < n; ++v) dist[v] = d[v * n + e];
  } else {
    try {
      distances_to(g, e, dist);
    } catch (const NegativeCycleError&) {
      throw NegativeCycleError(
          "spp: negative cycle in lattice graph; use prize_greedy or a smaller |mu2|");
    }
  }
  const auto ids = tight_path(g, dist, s, e);
  SppPlan plan;
  plan.trajectory = to_trajectory(g.spec(), ids);
  plan.total_weight = path_weight(g, ids);
  plan.solver_mode = mode;
  return plan;
}

// Beam search over elementary paths within a step budget. Each vertex can
// be entered at most once, so every measurement reward is granted once.
inline std::vector<std::size_t> prize_greedy_path(const LatticeDigraph& g, std::size_t s,
                                                  std::size_t e, const SppOptions& opt) {
  struct Label {
    std::size_t vertex;
    double cost;
    std::ptrdiff_t parent;
    std::uint64_t hash;
  };
  const GridSpec& spec = g.spec();
  const GridIndex goal = spec.index(e);
  const auto l1 = static_cast<std::size_t>(manhattan(spec.index(s), goal));
  const auto budget = std::max<std::size_t>(
      l1, static_cast<std::size_t>(std::ceil(std::max(1.0, opt.budget_factor) * static_cast<double>(l1))));
  const std::size_t beam = std::max<std::size_t>(1, opt.beam_width);
  auto key = [](std::size_t v) {
    std::uint64_t st = v;
    return splitmix64(st);
  };

  std::vector<Label> arena;
  arena.push_back({s, 0.0, -1, key(s)});
  std::vector<std::size_t> layer{0};
  double best_cost = std::numeric_limits<double>::infinity();
  std::ptrdiff_t best_parent = -1;

  auto on_path = [&](std::size_t label, std::size_t v) {
    for (std::ptrdiff_t l = static_cast<std::ptrdiff_t>(label); l >= 0; l = arena[static_cast<std::size_t>(l)].parent)
      if (arena[static_cast<std::size_t>(l)].vertex == v) return true;
    return false;
  };

  for (std::size_t depth = 1; depth <= budget && !layer.empty(); ++depth) {
    std::vector<Label> next;
    for (std::size_t li : layer) {
      const Label cur = arena[li];
      g.for_each_neighbor(cur.vertex, [&](std::size_t v) {
        if (static_cast<std::size_t>(manhattan(spec.index(v), goal)) > budget - depth) return;
        if (on_path(li, v)) return;
        const double cost = cur.cost + g.weight(cur.vertex, v);
        if (v == e) {
          if (cost < best_cost) {
            best_cost = cost;
            best_parent = static_cast<std::ptrdiff_t>(li);
          }
          return;
        }
        next.push_back({v, cost, static_cast<std::ptrdiff_t>(li), cur.hash ^ key(v)});
      });
    }
    // Same vertex with the same visited set: keep the cheapest label.
    std::sort(next.begin(), next.end(), [](const Label& a, const Label& b) {
      if (a.vertex != b.vertex) return a.vertex < b.vertex;
      if (a.hash != b.hash) return a.hash < b.hash;
      if (a.cost != b.cost) return a.cost < b.cost;
      return a.parent < b.parent;
    });
    next.erase(std::unique(next.begin(), next.end(),
                           [](const Label& a, const Label& b) {
                             return a.vertex == b.vertex && a.hash == b.hash;
                           }),
               next.end());
    // Rank by cost so far plus the plain step cost of the remaining L1 distance.
    auto rank = [&](const Label& l) {
      return l.cost + spec.delta_d * manhattan(spec.index(l.vertex), goal);
    };
    std::sort(next.begin(), next.end(), [&](const Label& a, const Label& b) {
      const double ra = rank(a), rb = rank(b);
      if (ra != rb) return ra < rb;
      if (a.vertex != b.vertex) return a.vertex < b.vertex;
      return a.hash < b.hash;
    });
    if (next.size() > beam) next.resize(beam);
    layer.clear();
    for (const auto& l : next) {
      layer.push_back(arena.size());
      arena.push_back(l);
    }
  }
  if (best_parent < 0) return {};
  std::vector<std::size_t> ids{e};
  for (std::ptrdiff_t l = best_parent; l >= 0; l = arena[static_cast<std::size_t>(l)].parent)
    ids.push_back(arena[static_cast<std::size_t>(l)].vertex);
  std::reverse(ids.begin(), ids.end());
  return ids;
}

}  // namespace detail

/// Plans a lattice path from v_s to v_e.
inline SppPlan plan_spp(const ChannelKnowledgeMap& ckm, const GridIndex& v_s, const GridIndex& v_e,
                        const SppWeights& w, const SppOptions& opt = {}) {
  w.validate();
  ckm.spec.require(v_s, "spp plan start");
  ckm.spec.require(v_e, "spp plan end");
  if (v_s == v_e) throw InvalidArgument("spp plan: start and end coincide");
  SppMode mode = opt.mode;
  if (mode == SppMode::automatic) mode = w.mu2 < 0.0 ? SppMode::prize_greedy : SppMode::bellman_ford;

  const LatticeDigraph g(ckm, w);
  const std::size_t s = ckm.spec.linear(v_s);
  const std::size_t e = ckm.spec.linear(v_e);
  if (mode != SppMode::prize_greedy) return detail::plan_exact(g, s, e, mode, opt);

  const auto ids = detail::prize_greedy_path(g, s, e, opt);
  if (ids.empty()) {
    const LatticeDigraph fallback_graph(ckm, SppWeights{w.mu1, 0.0});
    auto plan = detail::plan_exact(fallback_graph, s, e, SppMode::bellman_ford, opt);
    plan.total_weight = 0.0;
    for (std::size_t n = 0; n + 1 < plan.trajectory.waypoints.size(); ++n)
      plan.total_weight += g.weight(ckm.spec.linear(plan.trajectory.waypoints[n]),
                                    ckm.spec.linear(plan.trajectory.waypoints[n + 1]));
    plan.solver_mode = SppMode::prize_greedy;
    plan.fallback = true;
    return plan;
  }
  SppPlan plan;
  plan.trajectory = detail::to_trajectory(ckm.spec, ids);
  plan.total_weight = detail::path_weight(g, ids);
  plan.solver_mode = SppMode::prize_greedy;
  return plan;
}

}  // namespace ckmnav
