#pragma once

// Ordinary Kriging on the CKM lattice: exponential semivariogram fitting,
// the bordered (N+1)x(N+1) weight system, estimation variance, map completion
// and the global mean-square error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "ckmnav/ckm.hpp"
#include "ckmnav/errors.hpp"
#include "ckmnav/linalg.hpp"
#include "ckmnav/parallel.hpp"
#include "ckmnav/random.hpp"
#include "ckmnav/vec3.hpp"

namespace ckmnav {

/// r(d) = C0 + C (1 - exp(-d / a)).
struct SemivariogramModel {
  double nugget = 0.0;        // C0
  double partial_sill = 1.0;  // C
  double range_m = 1.0;       // a

  double operator()(double d) const {
    return nugget + partial_sill * (1.0 - std::exp(-d / range_m));
  }

  /// Value used inside the Kriging system: zero for coincident points (the
  /// nugget is a discontinuity at the origin), r(d) otherwise.
  double between(double d) const { return d > 0.0 ? (*this)(d) : 0.0; }

  double sill() const { return nugget + partial_sill; }

  void validate() const {
    if (!(nugget >= 0.0)) throw InvalidArgument("semivariogram: nugget must be >= 0");
    if (!(partial_sill > 0.0)) throw InvalidArgument("semivariogram: partial_sill must be > 0");
    if (!(range_m > 0.0)) throw InvalidArgument("semivariogram: range_m must be > 0");
  }
};

struct SpatialSample {
  Vec3 position;
  double value = 0.0;
};

struct EmpiricalBin {
  double lag = 0.0;  // mean pair distance inside the bin
  double semivariance = 0.0;
  std::size_t pairs = 0;
};

/// Classical (Matheron) estimator: half the mean squared difference of all
/// pairs whose distance falls in [b w, (b+1) w), for distances below max_lag.
inline std::vector<EmpiricalBin> empirical_semivariogram(std::span<const SpatialSample> points,
                                                         double bin_width_m, double max_lag_m) {
  if (points.size() < 2) throw InvalidArgument("empirical_semivariogram: need at least 2 points");
  if (!(bin_width_m > 0.0)) throw InvalidArgument("empirical_semivariogram: bin_width must be > 0");
  if (!(max_lag_m > 0.0)) throw InvalidArgument("empirical_semivariogram: max_lag must be > 0");
  const auto nbins = static_cast<std::size_t>(std::ceil(max_lag_m / bin_width_m));
  std::vector<double> lag_sum(nbins, 0.0), sq_sum(nbins, 0.0);
  std::vector<std::size_t> count(nbins, 0);
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t b = a + 1; b < points.size(); ++b) {
      const double d = distance(points[a].position, points[b].position);
      if (!(d < max_lag_m)) continue;
      const auto bin = std::min(nbins - 1, static_cast<std::size_t>(d / bin_width_m));
      const double diff = points[a].value - points[b].value;
      lag_sum[bin] += d;
      sq_sum[bin] += diff * diff;
      ++count[bin];
    }
  }
  std::vector<EmpiricalBin> out;
  for (std::size_t b = 0; b < nbins; ++b) {
    if (count[b] == 0) continue;
    const auto c = static_cast<double>(count[b]);
    out.push_back({lag_sum[b] / c, 0.5 * sq_sum[b] / c, count[b]});
  }
  return out;
}

struct VariogramFit {
  SemivariogramModel model;
  double residual = 0.0;  // sum of squared bin residuals
  bool degenerate = false;
};

namespace detail {

struct LinearFit {
  double nugget = 0.0;
  double sill = 0.0;
  double sse = 0.0;
};

// Best (C0 >= 0, C > 0) for a fixed range; the model is linear in both.
inline LinearFit fit_for_range(std::span<const EmpiricalBin> bins, double range,
                               double min_sill) {
  double n = 0.0, sf = 0.0, sff = 0.0, sy = 0.0, sfy = 0.0;
  for (const auto& b : bins) {
    const double f = 1.0 - std::exp(-b.lag / range);
    n += 1.0;
    sf += f;
    sff += f * f;
    sy += b.semivariance;
    sfy += f * b.semivariance;
  }
  LinearFit out;
  const double det = n * sff - sf * sf;
  bool solved = false;
  if (std::abs(det) > 1e-14 * std::max(1.0, n * sff)) {
    out.nugget = (sy * sff - sf * sfy) / det;
    out.sill = (n * sfy - sf * sy) / det;
    solved = out.nugget >= 0.0 && out.sill > 0.0;
  }
  if (!solved) {
    // Boundary candidates: C0 = 0, or C at its floor.
    LinearFit a{0.0, sff > 0.0 ? std::max(min_sill, sfy / sff) : min_sill, 0.0};
    LinearFit b{std::max(0.0, (sy - min_sill * sf) / n), min_sill, 0.0};
    auto sse = [&](const LinearFit& m) {
      double s = 0.0;
      for (const auto& bin : bins) {
        const double r = bin.semivariance - (m.nugget + m.sill * (1.0 - std::exp(-bin.lag / range)));
        s += r * r;
      }
      return s;
    };
    a.sse = sse(a);
    b.sse = sse(b);
    return a.sse <= b.sse ? a : b;
  }
  for (const auto& bin : bins) {
    const double r =
        bin.semivariance - (out.nugget + out.sill * (1.0 - std::exp(-bin.lag / range)));
    out.sse += r * r;
  }
  return out;
}

}  // namespace detail

/// Least-squares exponential fit. The two amplitude parameters are solved in
/// closed form for each candidate range (variable projection); the range is
/// found by a log-spaced scan refined with golden-section search.
inline VariogramFit fit_exponential(std::span<const EmpiricalBin> bins) {
  if (bins.size() < 3) throw InvalidArgument("fit_exponential: need at least 3 bins");
  double lag_min = std::numeric_limits<double>::infinity();
  double lag_max = 0.0;
  double y_max = 0.0;
  for (const auto& b : bins) {
    if (b.lag > 0.0) lag_min = std::min(lag_min, b.lag);
    lag_max = std::max(lag_max, b.lag);
    y_max = std::max(y_max, std::abs(b.semivariance));
  }
  if (!std::isfinite(lag_min) || !(lag_max > 0.0))
    throw InvalidArgument("fit_exponential: bins need positive lags");

  constexpr double kMinSillFloor = 1e-12;
  if (y_max <= kMinSillFloor) {
    VariogramFit fit;
    fit.model = {0.0, kMinSillFloor, lag_max};
    fit.degenerate = true;
    return fit;
  }
  const double min_sill = 1e-9 * y_max;

  const double lo = std::log(lag_min / 10.0);
  const double hi = std::log(lag_max * 10.0);
  constexpr int kScan = 241;
  int best_i = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    const double la = lo + (hi - lo) * i / (kScan - 1);
    const double sse = detail::fit_for_range(bins, std::exp(la), min_sill).sse;
    if (sse < best_sse) {
      best_sse = sse;
      best_i = i;
    }
  }
  double a = lo + (hi - lo) * std::max(0, best_i - 1) / (kScan - 1);
  double b = lo + (hi - lo) * std::min(kScan - 1, best_i + 1) / (kScan - 1);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = detail::fit_for_range(bins, std::exp(c), min_sill).sse;
  double fd = detail::fit_for_range(bins, std::exp(d), min_sill).sse;
  for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = detail::fit_for_range(bins, std::exp(c), min_sill).sse;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = detail::fit_for_range(bins, std::exp(d), min_sill).sse;
    }
  }
  double range = std::exp(0.5 * (a + b));
  auto lf = detail::fit_for_range(bins, range, min_sill);
  // Keep the scan optimum if the refinement wandered onto a worse plateau.
  const double scan_range = std::exp(lo + (hi - lo) * best_i / (kScan - 1));
  const auto scan_fit = detail::fit_for_range(bins, scan_range, min_sill);
  if (scan_fit.sse < lf.sse) {
    lf = scan_fit;
    range = scan_range;
  }
  VariogramFit fit;
  fit.model = {lf.nugget, lf.sill, range};
  fit.residual = lf.sse;
  return fit;
}

// ---------------------------------------------------------------------------
// Weight system
// ---------------------------------------------------------------------------

struct KrigingSolution {
  std::vector<double> weights;  // one per input sample (zero outside the neighborhood)
  double multiplier = 0.0;      // Lagrange multiplier of the sum-to-one constraint
  double variance = 0.0;        // r0^T R^-1 r0, clamped at zero
  bool clamped = false;
};

/// Solves R [lambda; -nu] = r0 over the given positions (all of them).
inline KrigingSolution solve_kriging_system(std::span<const Vec3> positions, const Vec3& target,
                                            const SemivariogramModel& model) {
  const std::size_t n = positions.size();
  if (n == 0) throw InvalidArgument("kriging: no measured samples");
  linalg::SquareMatrix r(n + 1);
  std::vector<double> r0(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double g = model.between(distance(positions[i], positions[j]));
      r(i, j) = g;
      r(j, i) = g;
    }
    r(i, n) = 1.0;
    r(n, i) = 1.0;
    r0[i] = model.between(distance(positions[i], target));
  }
  r0[n] = 1.0;
  const linalg::LuFactorization lu(std::move(r));
  const auto lambda = lu.solve(r0);
  KrigingSolution sol;
  sol.weights.assign(lambda.begin(), lambda.begin() + static_cast<std::ptrdiff_t>(n));
  sol.multiplier = -lambda[n];
  double var = 0.0;
  for (std::size_t i = 0; i <= n; ++i) var += r0[i] * lambda[i];
  if (var < 0.0) {
    sol.clamped = true;
    var = 0.0;
  }
  sol.variance = var;
  return sol;
}

/// Indices of the n_max samples nearest to target (distance, then index).
/// n_max == 0 keeps every sample.
inline std::vector<std::size_t> nearest_samples(std::span<const SpatialSample> samples,
                                                const Vec3& target, std::size_t n_max) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (n_max == 0 || n_max >= samples.size()) return order;
  std::vector<double> d(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) d[i] = distance(samples[i].position, target);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_max), order.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] != d[b] ? d[a] < d[b] : a < b; });
  order.resize(n_max);
  std::sort(order.begin(), order.end());
  return order;
}

/// Ordinary Kriging weights for `target`, truncated to the n_max nearest
/// samples (0 = all).
inline KrigingSolution solve_weights(std::span<const SpatialSample> measured, const Vec3& target,
                                     const SemivariogramModel& model, std::size_t n_max = 0) {
  if (measured.empty()) throw InvalidArgument("solve_weights: no measured samples");
  const auto keep = nearest_samples(measured, target, n_max);
  std::vector<Vec3> pos;
  pos.reserve(keep.size());
  for (auto i : keep) pos.push_back(measured[i].position);
  auto local = solve_kriging_system(pos, target, model);
  KrigingSolution sol;
  sol.weights.assign(measured.size(), 0.0);
  for (std::size_t t = 0; t < keep.size(); ++t) sol.weights[keep[t]] = local.weights[t];
  sol.multiplier = local.multiplier;
  sol.variance = local.variance;
  sol.clamped = local.clamped;
  return sol;
}

inline double apply_weights(const KrigingSolution& sol, std::span<const SpatialSample> measured) {
  double v = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) v += sol.weights[i] * measured[i].value;
  return v;
}

// ---------------------------------------------------------------------------
// Lattice-backed estimation
// ---------------------------------------------------------------------------

/// A lattice neighbour together with its squared distance in cell units.
struct LatticeNeighbor {
  std::int64_t d2 = 0;
  std::size_t id = 0;

  friend bool operator<(const LatticeNeighbor& a, const LatticeNeighbor& b) {
    return a.d2 != b.d2 ? a.d2 < b.d2 : a.id < b.id;
  }
};

/// The n_max flagged grids nearest to `target`, ordered by (distance, id).
/// Searches Chebyshev shells outward; n_max == 0 returns every flagged grid.
inline std::vector<LatticeNeighbor> nearest_flagged(const GridSpec& spec,
                                                    std::span<const std::uint8_t> flags,
                                                    const GridIndex& target, std::size_t n_max) {
  std::vector<LatticeNeighbor> found;
  auto visit = [&](int i, int j, int k) {
    const std::size_t id = spec.linear({i, j, k});
    if (!flags[id]) return;
    const std::int64_t di = i - target.i, dj = j - target.j, dk = k - target.k;
    found.push_back({di * di + dj * dj + dk * dk, id});
  };
  const int max_r = std::max({spec.ni, spec.nj, spec.nk});
  for (int r = 0; r <= max_r; ++r) {
    const int i0 = std::max(1, target.i - r), i1 = std::min(spec.ni, target.i + r);
    const int j0 = std::max(1, target.j - r), j1 = std::min(spec.nj, target.j + r);
    const int k0 = std::max(1, target.k - r), k1 = std::min(spec.nk, target.k + r);
    for (int k = k0; k <= k1; ++k) {
      const bool k_edge = std::abs(k - target.k) == r;
      for (int j = j0; j <= j1; ++j) {
        const bool jk_edge = k_edge || std::abs(j - target.j) == r;
        if (jk_edge) {
          for (int i = i0; i <= i1; ++i) visit(i, j, k);
        } else {
          if (target.i - r >= 1) visit(target.i - r, j, k);
          if (r > 0 && target.i + r <= spec.ni) visit(target.i + r, j, k);
        }
      }
    }
    if (n_max != 0 && found.size() >= n_max) {
      std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(n_max - 1),
                       found.end());
      const std::int64_t kth = found[n_max - 1].d2;
      const std::int64_t next = static_cast<std::int64_t>(r + 1) * (r + 1);
      if (kth < next) break;
    }
  }
  std::sort(found.begin(), found.end());
  if (n_max != 0 && found.size() > n_max) found.resize(n_max);
  return found;
}

struct KrigingEstimate {
  double value = 0.0;
  double variance = 0.0;
  bool clamped = false;
};

/// Estimate at one grid from its n_max nearest measured grids.
inline KrigingEstimate estimate(const ChannelKnowledgeMap& ckm, const GridIndex& target,
                                const SemivariogramModel& model, std::size_t n_max = 32) {
  ckm.spec.require(target, "estimate");
  const auto nb = nearest_flagged(ckm.spec, ckm.measured, target, n_max);
  if (nb.empty()) throw InvalidArgument("estimate: map has no measured grids");
  std::vector<Vec3> pos;
  pos.reserve(nb.size());
  for (const auto& n : nb) pos.push_back(ckm.spec.center(n.id));
  const auto sol = solve_kriging_system(pos, ckm.spec.center(target), model);
  KrigingEstimate out;
  for (std::size_t t = 0; t < nb.size(); ++t) out.value += sol.weights[t] * ckm.estimate_sinr_db[nb[t].id];
  out.variance = sol.variance;
  out.clamped = sol.clamped;
  return out;
}

struct KrigingOptions {
  std::size_t n_max = 32;        // neighbourhood cap, 0 = all measured grids
  double bin_width_m = 0.0;      // 0 = grid granularity
  double max_lag_m = 0.0;        // 0 = 20 x grid granularity
  std::size_t max_fit_points = 2000;
  std::uint64_t fit_seed = 0;
  unsigned jobs = 1;
};

struct CompletionStats {
  std::size_t solves = 0;
  std::size_t clamped = 0;
};

/// Re-estimates every unmeasured grid in place.
inline CompletionStats complete(ChannelKnowledgeMap& ckm, const SemivariogramModel& model,
                                const KrigingOptions& opt = {}) {
  std::vector<std::size_t> targets;
  for (std::size_t id = 0; id < ckm.size(); ++id)
    if (!ckm.is_measured(id)) targets.push_back(id);
  if (targets.empty()) return {};
  if (ckm.measured_count() == 0) throw InvalidArgument("complete: map has no measured grids");
  std::vector<std::uint8_t> clamped(targets.size(), 0);
  parallel_for(targets.size(), opt.jobs, [&](std::size_t t) {
    const std::size_t id = targets[t];
    const auto e = estimate(ckm, ckm.spec.index(id), model, opt.n_max);
    ckm.estimate_sinr_db[id] = e.value;
    ckm.variance[id] = e.variance;
    clamped[t] = e.clamped ? 1 : 0;
  });
  CompletionStats stats;
  stats.solves = targets.size();
  stats.clamped = static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), std::uint8_t{1}));
  return stats;
}

/// Fits the exponential model to (a seeded subsample of) the measured grids.
inline VariogramFit fit_from_map(const ChannelKnowledgeMap& ckm, const KrigingOptions& opt = {}) {
  std::vector<std::size_t> ids;
  for (std::size_t id = 0; id < ckm.size(); ++id)
    if (ckm.is_measured(id)) ids.push_back(id);
  if (opt.max_fit_points != 0 && ids.size() > opt.max_fit_points) {
    Rng rng(opt.fit_seed);
    rng.shuffle(ids);
    ids.resize(opt.max_fit_points);
    std::sort(ids.begin(), ids.end());
  }
  std::vector<SpatialSample> samples;
  samples.reserve(ids.size());
  for (auto id : ids) samples.push_back({ckm.spec.center(id), ckm.estimate_sinr_db[id]});
  const double delta = ckm.spec.delta_d;
  const double width = opt.bin_width_m > 0.0 ? opt.bin_width_m : delta;
  const double max_lag = opt.max_lag_m > 0.0 ? opt.max_lag_m : 20.0 * delta;
  const auto bins = empirical_semivariogram(samples, width, max_lag);
  return fit_exponential(bins);
}

/// Mean over all grids of (truth - estimate)^2, dB^2.
inline double global_mse(const ChannelKnowledgeMap& ckm) {
  double s = 0.0;
  for (std::size_t id = 0; id < ckm.size(); ++id) {
    const double e = ckm.truth_sinr_db[id] - ckm.estimate_sinr_db[id];
    s += e * e;
  }
  return s / static_cast<double>(ckm.size());
}

/// Stationarity diagnostic: mean and variance of the measured values.
struct MeasuredStatistics {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
};

inline MeasuredStatistics measured_statistics(const ChannelKnowledgeMap& ckm) {
  MeasuredStatistics st;
  double sum = 0.0, sq = 0.0;
  for (std::size_t id = 0; id < ckm.size(); ++id) {
    if (!ckm.is_measured(id)) continue;
    ++st.count;
    sum += ckm.estimate_sinr_db[id];
  }
  if (st.count == 0) return st;
  st.mean = sum / static_cast<double>(st.count);
  for (std::size_t id = 0; id < ckm.size(); ++id) {
    if (!ckm.is_measured(id)) continue;
    const double d = ckm.estimate_sinr_db[id] - st.mean;
    sq += d * d;
  }
  st.variance = sq / static_cast<double>(st.count);
  return st;
}

struct PartialMap {
  ChannelKnowledgeMap map;
  VariogramFit fit;
  CompletionStats stats;
};

/// Masks a ground-truth map, fits the semivariogram on what is left and
/// fills the masked grids by Kriging.
inline PartialMap make_partial(const ChannelKnowledgeMap& truth, double missing_fraction,
                               std::uint64_t seed, const KrigingOptions& opt = {}) {
  PartialMap out{mask_partial(truth, missing_fraction, seed), {}, {}};
  if (out.map.measured_count() == out.map.size()) {
    out.fit.model = {0.0, 1.0, 5.0 * truth.spec.delta_d};
    out.fit.degenerate = true;
    return out;
  }
  out.fit = fit_from_map(out.map, opt);
  out.stats = complete(out.map, out.fit.model, opt);
  return out;
}

}  // namespace ckmnav
