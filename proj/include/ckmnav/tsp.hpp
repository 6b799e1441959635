#pragma once

// Measurement-value planning: greedy choice of the grids whose measurement
// most reduces the summed Kriging variance, then an open tour through them
// solved as a closed tour with the start-end edge forced in.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ckmnav/ckm.hpp"
#include "ckmnav/errors.hpp"
#include "ckmnav/geom.hpp"
#include "ckmnav/grid.hpp"
#include "ckmnav/kriging.hpp"
#include "ckmnav/linalg.hpp"
#include "ckmnav/parallel.hpp"
#include "ckmnav/random.hpp"

namespace ckmnav {

struct MeasurementSet {
  std::vector<GridIndex> grids;  // in selection order
  double objective = 0.0;        // summed variance over the unmeasured grids left out
  std::size_t candidates = 0;
  std::size_t variance_solves = 0;
};

struct SelectionOptions {
  std::size_t n_max = 32;  // Kriging neighbourhood cap, 0 = full solves
  unsigned jobs = 1;
};

/// Default corridor half-width: a quarter of the start-end distance.
inline double default_corridor_m(const GridSpec& spec, const GridIndex& v_s, const GridIndex& v_e) {
  return 0.25 * distance(spec.center(v_s), spec.center(v_e));
}

/// Unmeasured grids (other than the endpoints) whose centre lies within
/// corridor_m of the v_s-v_e segment, ascending id.
inline std::vector<std::size_t> corridor_candidates(const ChannelKnowledgeMap& ckm, double corridor_m,
                                                    const GridIndex& v_s, const GridIndex& v_e) {
  const Vec3 a = ckm.spec.center(v_s), b = ckm.spec.center(v_e);
  const std::size_t ids = ckm.spec.linear(v_s), ide = ckm.spec.linear(v_e);
  std::vector<std::size_t> out;
  for (std::size_t id = 0; id < ckm.size(); ++id) {
    if (ckm.is_measured(id) || id == ids || id == ide) continue;
    const Vec3 c = ckm.spec.center(id);
    const double d = (a == b) ? distance(c, a) : point_segment_distance(c, a, b);
    if (d <= corridor_m) out.push_back(id);
  }
  return out;
}

namespace detail {

inline double neighborhood_variance(const GridSpec& spec, const std::vector<LatticeNeighbor>& nb,
                                    std::size_t target, const SemivariogramModel& model) {
  std::vector<Vec3> pos;
  pos.reserve(nb.size());
  for (const auto& n : nb) pos.push_back(spec.center(n.id));
  return solve_kriging_system(pos, spec.center(target), model).variance;
}

inline LatticeNeighbor lattice_key(const GridSpec& spec, std::size_t from, std::size_t to) {
  const GridIndex a = spec.index(from), b = spec.index(to);
  const std::int64_t di = a.i - b.i, dj = a.j - b.j, dk = a.k - b.k;
  return {di * di + dj * dj + dk * dk, to};
}

// Neighbourhood of u after `s` becomes measured.
inline std::vector<LatticeNeighbor> with_added(const std::vector<LatticeNeighbor>& nb,
                                               LatticeNeighbor s, std::size_t n_max) {
  std::vector<LatticeNeighbor> out;
  out.reserve(nb.size() + 1);
  const auto pos = std::lower_bound(nb.begin(), nb.end(), s);
  out.insert(out.end(), nb.begin(), pos);
  out.push_back(s);
  out.insert(out.end(), pos, nb.end());
  if (n_max != 0 && out.size() > n_max) out.resize(n_max);
  return out;
}

}  // namespace detail

/// Greedy selection of n grids. At each step the candidate minimising the
/// summed variance of the remaining unmeasured grids is added. Adding s only
/// changes the variance of grids whose n_max neighbourhood s enters, so only
/// those are re-solved.
inline MeasurementSet select_measurement_set(const ChannelKnowledgeMap& ckm,
                                             const SemivariogramModel& model, std::size_t n,
                                             double corridor_m, const GridIndex& v_s,
                                             const GridIndex& v_e, const SelectionOptions& opt = {}) {
  model.validate();
  ckm.spec.require(v_s, "select_measurement_set start");
  ckm.spec.require(v_e, "select_measurement_set end");
  if (n == 0) throw InvalidArgument("select_measurement_set: n must be >= 1");
  if (!(corridor_m >= 0.0)) throw InvalidArgument("select_measurement_set: corridor_m must be >= 0");
  if (ckm.measured_count() == 0) throw InvalidArgument("select_measurement_set: map has no measured grids");
  const GridSpec& spec = ckm.spec;
  auto candidates = corridor_candidates(ckm, corridor_m, v_s, v_e);
  if (candidates.size() < n)
    throw InsufficientCandidatesError("select_measurement_set: need " + std::to_string(n) +
                                      " candidates, corridor holds " + std::to_string(candidates.size()));

  MeasurementSet result;
  result.candidates = candidates.size();
  const std::size_t total = ckm.size();
  std::vector<std::uint8_t> flags(ckm.measured.begin(), ckm.measured.end());
  std::vector<std::uint8_t> is_candidate(total, 0);
  for (auto c : candidates) is_candidate[c] = 1;

  std::vector<std::size_t> unmeasured;
  for (std::size_t id = 0; id < total; ++id)
    if (!flags[id]) unmeasured.push_back(id);
  std::vector<std::vector<LatticeNeighbor>> nb(total);
  std::vector<double> var(total, 0.0);
  parallel_for(unmeasured.size(), opt.jobs, [&](std::size_t t) {
    const std::size_t u = unmeasured[t];
    nb[u] = nearest_flagged(spec, flags, spec.index(u), opt.n_max);
    var[u] = detail::neighborhood_variance(spec, nb[u], u, model);
  });
  result.variance_solves += unmeasured.size();
  double j_cur = 0.0;
  for (auto u : unmeasured) j_cur += var[u];

  const int max_extent = std::max({spec.ni, spec.nj, spec.nk});
  for (std::size_t step = 0; step < n; ++step) {
    // For every candidate, the unmeasured grids whose neighbourhood it enters.
    std::vector<std::vector<std::size_t>> affected(total);
    for (auto u : unmeasured) {
      const bool full = opt.n_max != 0 && nb[u].size() >= opt.n_max;
      const GridIndex g = spec.index(u);
      int radius = max_extent;
      if (full) radius = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nb[u].back().d2))));
      for (int k = std::max(1, g.k - radius); k <= std::min(spec.nk, g.k + radius); ++k)
        for (int j = std::max(1, g.j - radius); j <= std::min(spec.nj, g.j + radius); ++j)
          for (int i = std::max(1, g.i - radius); i <= std::min(spec.ni, g.i + radius); ++i) {
            const std::size_t c = spec.linear({i, j, k});
            if (!is_candidate[c] || c == u) continue;
            if (!full || detail::lattice_key(spec, u, c) < nb[u].back()) affected[c].push_back(u);
          }
    }

    std::vector<double> score(candidates.size());
    std::vector<std::size_t> solves(candidates.size(), 0);
    parallel_for(candidates.size(), opt.jobs, [&](std::size_t t) {
      const std::size_t s = candidates[t];
      double j = j_cur - var[s];
      for (auto u : affected[s]) {
        const auto next = detail::with_added(nb[u], detail::lattice_key(spec, u, s), opt.n_max);
        j += detail::neighborhood_variance(spec, next, u, model) - var[u];
        ++solves[t];
      }
      score[t] = j;
    });
    for (auto s : solves) result.variance_solves += s;

    std::size_t best = 0;
    for (std::size_t t = 1; t < candidates.size(); ++t)
      if (score[t] < score[best]) best = t;
    const std::size_t s = candidates[best];
    for (auto u : affected[s]) {
      nb[u] = detail::with_added(nb[u], detail::lattice_key(spec, u, s), opt.n_max);
      var[u] = detail::neighborhood_variance(spec, nb[u], u, model);
    }
    result.variance_solves += affected[s].size();
    flags[s] = 1;
    is_candidate[s] = 0;
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
    unmeasured.erase(std::find(unmeasured.begin(), unmeasured.end(), s));
    var[s] = 0.0;
    // Re-sum rather than trusting the running score, to avoid drift.
    j_cur = 0.0;
    for (auto u : unmeasured) j_cur += var[u];
    result.grids.push_back(spec.index(s));
  }
  result.objective = j_cur;
  return result;
}

/// Summed Kriging variance of the unmeasured grids outside `chosen`, with
/// `chosen` treated as measured. Reference evaluation by direct re-solve.
inline double residual_variance(const ChannelKnowledgeMap& ckm, const SemivariogramModel& model,
                                const std::vector<GridIndex>& chosen, std::size_t n_max = 32) {
  std::vector<std::uint8_t> flags(ckm.measured.begin(), ckm.measured.end());
  for (const auto& g : chosen) flags[ckm.spec.linear(g)] = 1;
  double sum = 0.0;
  for (std::size_t u = 0; u < ckm.size(); ++u) {
    if (flags[u]) continue;
    const auto nb = nearest_flagged(ckm.spec, flags, ckm.spec.index(u), n_max);
    sum += detail::neighborhood_variance(ckm.spec, nb, u, model);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Tour construction
// ---------------------------------------------------------------------------

/// w_t: Euclidean length plus beta times the outage chord length.
inline double tour_edge_weight(const GridIndex& a, const GridIndex& b, const ChannelKnowledgeMap& ckm,
                               double beta) {
  if (!(beta >= 0.0)) throw InvalidArgument("tour_edge_weight: beta must be >= 0");
  if (a == b) throw InvalidArgument("tour_edge_weight: endpoints coincide");
  const Vec3 pa = ckm.spec.center(a), pb = ckm.spec.center(b);
  double outage = 0.0;
  if (beta > 0.0) {
    for (const auto& c : traversed_grids(pa, pb, ckm.spec))
      if (is_outage(ckm, ckm.spec.linear(c.index))) outage += c.length;
  }
  return distance(pa, pb) + beta * outage;
}

using WeightMatrix = linalg::SquareMatrix;

/// Forces edge (s, e) into every optimal closed tour by pricing it below
/// (N-1) min_w - (N-2) max_w.
inline WeightMatrix open_tsp_to_tsp(WeightMatrix w, std::size_t s, std::size_t e) {
  const std::size_t n = w.size();
  if (n < 3) throw InvalidArgument("open_tsp_to_tsp: need N >= 3");
  if (s >= n || e >= n || s == e) throw InvalidArgument("open_tsp_to_tsp: bad endpoints");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      hi = std::max(hi, w(a, b));
      if ((a == s && b == e) || (a == e && b == s)) continue;
      lo = std::min(lo, w(a, b));
    }
  }
  const double nn = static_cast<double>(n);
  const double forced = (nn - 1.0) * lo - (nn - 2.0) * hi - 1.0;
  w(s, e) = forced;
  w(e, s) = forced;
  return w;
}

enum class TspSolver { nn_2opt, sim_anneal, brute_force };

inline std::string to_string(TspSolver s) {
  switch (s) {
    case TspSolver::nn_2opt: return "nn_2opt";
    case TspSolver::sim_anneal: return "sim_anneal";
    case TspSolver::brute_force: return "brute_force";
  }
  return "unknown";
}

inline TspSolver parse_tsp_solver(const std::string& s) {
  if (s == "nn_2opt") return TspSolver::nn_2opt;
  if (s == "sim_anneal") return TspSolver::sim_anneal;
  if (s == "brute_force") return TspSolver::brute_force;
  throw InvalidArgument("unknown tsp solver '" + s + "'");
}

inline double tour_weight(const WeightMatrix& w, const std::vector<std::size_t>& tour) {
  double s = 0.0;
  for (std::size_t n = 0; n < tour.size(); ++n) s += w(tour[n], tour[(n + 1) % tour.size()]);
  return s;
}

inline double path_weight(const WeightMatrix& w, const std::vector<std::size_t>& path) {
  double s = 0.0;
  for (std::size_t n = 0; n + 1 < path.size(); ++n) s += w(path[n], path[n + 1]);
  return s;
}

/// Nearest-neighbour tour from `start`; ties go to the lowest index.
inline std::vector<std::size_t> nearest_neighbor_tour(const WeightMatrix& w, std::size_t start = 0) {
  const std::size_t n = w.size();
  std::vector<std::uint8_t> used(n, 0);
  std::vector<std::size_t> tour{start};
  used[start] = 1;
  while (tour.size() < n) {
    const std::size_t cur = tour.back();
    std::size_t best = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!used[v] && (best == n || w(cur, v) < w(cur, best))) best = v;
    used[best] = 1;
    tour.push_back(best);
  }
  return tour;
}

/// Best-improvement 2-opt until no move improves the tour.
inline void two_opt(const WeightMatrix& w, std::vector<std::size_t>& tour) {
  const std::size_t n = tour.size();
  if (n < 4) return;
  const double tol = 1e-12 * std::max(1.0, w.max_abs());
  for (;;) {
    double best = -tol;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i + 2 < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;  // the two edges share a vertex
        const std::size_t a = tour[i], b = tour[i + 1], c = tour[j], d = tour[(j + 1) % n];
        const double delta = w(a, c) + w(b, d) - w(a, b) - w(c, d);
        if (delta < best) {
          best = delta;
          bi = i;
          bj = j;
        }
      }
    }
    if (bj == 0) return;
    std::reverse(tour.begin() + static_cast<std::ptrdiff_t>(bi + 1),
                 tour.begin() + static_cast<std::ptrdiff_t>(bj + 1));
  }
}

namespace detail {

inline std::vector<std::size_t> brute_force_tour(const WeightMatrix& w) {
  const std::size_t n = w.size();
  if (n > 10) throw InvalidArgument("brute_force: limited to N <= 10");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best = perm;
  double best_w = tour_weight(w, perm);
  while (std::next_permutation(perm.begin() + 1, perm.end())) {
    const double t = tour_weight(w, perm);
    if (t < best_w) {
      best_w = t;
      best = perm;
    }
  }
  return best;
}

inline std::vector<std::size_t> anneal_tour(const WeightMatrix& w, std::uint64_t seed) {
  const std::size_t n = w.size();
  auto cur = nearest_neighbor_tour(w, 0);
  two_opt(w, cur);
  if (n < 4) return cur;
  double cur_w = tour_weight(w, cur);
  auto best = cur;
  double best_w = cur_w;
  double mean = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) mean += std::abs(w(a, b));
  mean /= static_cast<double>(n * (n - 1) / 2);
  double temp = std::max(mean, 1e-12);
  Rng rng(seed);
  const std::size_t iters = 200 * n;
  std::vector<std::size_t> cand;
  for (std::size_t it = 0; it < iters; ++it, temp *= 0.995) {
    cand = cur;
    if (rng.uniform() < 0.5) {
      // 2-opt move: reverse a random inner slice.
      std::size_t i = rng.index(n), j = rng.index(n);
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      std::reverse(cand.begin() + static_cast<std::ptrdiff_t>(i), cand.begin() + static_cast<std::ptrdiff_t>(j + 1));
    } else {
      // or-opt move: relocate a segment of 1-3 vertices.
      const std::size_t len = 1 + rng.index(std::min<std::size_t>(3, n - 2));
      const std::size_t from = rng.index(n - len + 1);
      std::vector<std::size_t> seg(cand.begin() + static_cast<std::ptrdiff_t>(from),
                                   cand.begin() + static_cast<std::ptrdiff_t>(from + len));
      cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(from),
                 cand.begin() + static_cast<std::ptrdiff_t>(from + len));
      const std::size_t to = rng.index(cand.size() + 1);
      cand.insert(cand.begin() + static_cast<std::ptrdiff_t>(to), seg.begin(), seg.end());
    }
    const double cw = tour_weight(w, cand);
    const double delta = cw - cur_w;
    if (delta <= 0.0 || rng.uniform() < std::exp(-delta / temp)) {
      cur.swap(cand);
      cur_w = cw;
      if (cur_w < best_w) {
        best_w = cur_w;
        best = cur;
      }
    }
  }
  // Rotate so vertex 0 leads, as the other solvers do.
  std::rotate(best.begin(), std::find(best.begin(), best.end(), std::size_t{0}), best.end());
  return best;
}

}  // namespace detail

/// Hamiltonian cycle over all vertices, listed from vertex 0.
inline std::vector<std::size_t> solve_tsp(const WeightMatrix& w, TspSolver solver, std::uint64_t seed = 0) {
  if (w.size() < 3) throw InvalidArgument("solve_tsp: need N >= 3");
  switch (solver) {
    case TspSolver::brute_force: return detail::brute_force_tour(w);
    case TspSolver::sim_anneal: return detail::anneal_tour(w, seed);
    case TspSolver::nn_2opt: break;
  }
  auto tour = nearest_neighbor_tour(w, 0);
  two_opt(w, tour);
  return tour;
}

namespace detail {

inline bool has_edge(const std::vector<std::size_t>& tour, std::size_t a, std::size_t b) {
  for (std::size_t n = 0; n < tour.size(); ++n) {
    const std::size_t x = tour[n], y = tour[(n + 1) % tour.size()];
    if ((x == a && y == b) || (x == b && y == a)) return true;
  }
  return false;
}

// Cuts edge (s, e) out of a cycle and lists the path from s to e.
inline std::vector<std::size_t> cut_cycle(std::vector<std::size_t> tour, std::size_t s, std::size_t e) {
  std::rotate(tour.begin(), std::find(tour.begin(), tour.end(), s), tour.end());
  if (tour.back() == e) return tour;
  if (tour[1] == e) {
    std::reverse(tour.begin() + 1, tour.end());
    return tour;
  }
  throw Error("open tour: cycle lacks the forced start-end edge");
}

}  // namespace detail

struct TourSolution {
  std::vector<std::size_t> order;  // vertex indices from v_s to v_e
  double total_weight = 0.0;       // open-path weight under the unmodified matrix
};

/// Minimum-weight Hamiltonian path from s to e.
inline TourSolution solve_open_tsp(const WeightMatrix& w, std::size_t s, std::size_t e, TspSolver solver,
                                   std::uint64_t seed = 0) {
  TourSolution sol;
  if (w.size() == 2) {
    sol.order = {s, e};
  } else {
    const auto forced = open_tsp_to_tsp(w, s, e);
    auto cycle = solve_tsp(forced, solver, seed);
    if (!detail::has_edge(cycle, s, e)) cycle = solve_tsp(forced, TspSolver::nn_2opt);
    sol.order = detail::cut_cycle(cycle, s, e);
  }
  sol.total_weight = path_weight(w, sol.order);
  return sol;
}

struct TspParams {
  std::size_t n = 8;
  double beta = 0.0;
  double corridor_m = -1.0;  // < 0: default corridor
  TspSolver solver = TspSolver::nn_2opt;
  std::uint64_t seed = 0;
};

struct TspPlan {
  Trajectory trajectory;
  MeasurementSet set;
  TourSolution tour;
};

/// Plans v_s -> S_r -> v_e.
inline TspPlan plan_tsp(const ChannelKnowledgeMap& ckm, const SemivariogramModel& model,
                        const GridIndex& v_s, const GridIndex& v_e, const TspParams& p,
                        const SelectionOptions& opt = {}) {
  if (v_s == v_e) throw InvalidArgument("tsp plan: start and end coincide");
  if (!(p.beta >= 0.0)) throw InvalidArgument("tsp plan: beta must be >= 0");
  const double corridor = p.corridor_m < 0.0 ? default_corridor_m(ckm.spec, v_s, v_e) : p.corridor_m;
  TspPlan plan;
  plan.set = select_measurement_set(ckm, model, p.n, corridor, v_s, v_e, opt);
  std::vector<GridIndex> verts{v_s};
  verts.insert(verts.end(), plan.set.grids.begin(), plan.set.grids.end());
  verts.push_back(v_e);
  const std::size_t n = verts.size();
  WeightMatrix w(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double t = tour_edge_weight(verts[a], verts[b], ckm, p.beta);
      w(a, b) = t;
      w(b, a) = t;
    }
  plan.tour = solve_open_tsp(w, 0, n - 1, p.solver, p.seed);
  for (auto v : plan.tour.order) plan.trajectory.waypoints.push_back(verts[v]);
  return plan;
}

}  // namespace ckmnav
