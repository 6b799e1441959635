#pragma once

// Channel knowledge map: per-grid expected SINR on the lattice, the
// measurement mask, current estimates and their Kriging variances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "ckmnav/env.hpp"
#include "ckmnav/grid.hpp"
#include "ckmnav/parallel.hpp"
#include "ckmnav/random.hpp"

namespace ckmnav {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

struct ChannelKnowledgeMap {
  GridSpec spec;
  double gamma_th_db = 0.0;
  std::vector<double> truth_sinr_db;
  std::vector<std::uint8_t> measured;
  std::vector<double> estimate_sinr_db;
  std::vector<double> variance;
  std::vector<int> association;  // 1-based station index

  std::size_t size() const { return truth_sinr_db.size(); }

  bool is_measured(std::size_t id) const { return measured[id] != 0; }

  std::size_t measured_count() const {
    return static_cast<std::size_t>(std::count(measured.begin(), measured.end(), std::uint8_t{1}));
  }

  /// Records a noiseless measurement: the estimate snaps to the truth.
  void mark_measured(std::size_t id) {
    measured[id] = 1;
    estimate_sinr_db[id] = truth_sinr_db[id];
    variance[id] = 0.0;
  }

  /// Records a measurement carrying an additive error (dB).
  void mark_measured(std::size_t id, double error_db) {
    mark_measured(id);
    estimate_sinr_db[id] += error_db;
  }
};

struct SinrSample {
  double sinr_db = 0.0;
  int station = 1;  // 1-based
};

/// Expected-SINR lower bound for every candidate serving station, dB.
inline std::vector<double> expected_sinr_per_station_db(const UrbanScenario& sc, const Vec3& p) {
  const std::size_t m = sc.stations.size();
  std::vector<double> rx(m);
  for (std::size_t s = 0; s < m; ++s) rx[s] = db_to_linear(mean_received_dbm(sc, sc.stations[s], p));
  const double noise = db_to_linear(sc.radio.noise_dbm);
  std::vector<double> out(m);
  for (std::size_t s = 0; s < m; ++s) {
    double interference = 0.0;
    for (std::size_t o = 0; o < m; ++o)
      if (o != s) interference += rx[o];
    out[s] = linear_to_db(rx[s] / (interference + noise));
  }
  return out;
}

/// Best-station expected SINR; ties go to the lowest station index.
inline SinrSample expected_sinr_db(const UrbanScenario& sc, const Vec3& p) {
  const auto per = expected_sinr_per_station_db(sc, p);
  SinrSample best{per.front(), 1};
  for (std::size_t s = 1; s < per.size(); ++s) {
    if (per[s] > best.sinr_db) best = {per[s], static_cast<int>(s) + 1};
  }
  return best;
}

/// Fully measured map evaluated at every grid centre.
inline ChannelKnowledgeMap build_ground_truth(const UrbanScenario& sc, const GridSpec& spec,
                                              double gamma_th_db, unsigned jobs = 1) {
  sc.validate();
  ChannelKnowledgeMap ckm;
  ckm.spec = spec;
  ckm.gamma_th_db = gamma_th_db;
  const std::size_t n = spec.size();
  ckm.truth_sinr_db.assign(n, 0.0);
  ckm.association.assign(n, 1);
  parallel_for(n, jobs, [&](std::size_t id) {
    const auto s = expected_sinr_db(sc, spec.center(id));
    ckm.truth_sinr_db[id] = s.sinr_db;
    ckm.association[id] = s.station;
  });
  ckm.estimate_sinr_db = ckm.truth_sinr_db;
  ckm.measured.assign(n, 1);
  ckm.variance.assign(n, 0.0);
  return ckm;
}

/// Masks exactly floor(fraction * size) grids chosen by a seeded shuffle.
/// Masked estimates/variances are NaN until a Kriging pass fills them.
inline ChannelKnowledgeMap mask_partial(ChannelKnowledgeMap ckm, double missing_fraction,
                                        std::uint64_t seed) {
  if (!(missing_fraction >= 0.0 && missing_fraction < 1.0))
    throw InvalidArgument("mask_partial: missing_fraction must be in [0, 1)");
  const std::size_t n = ckm.size();
  const auto masked = static_cast<std::size_t>(std::floor(missing_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  for (std::size_t id = 0; id < n; ++id) ckm.mark_measured(id);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t r = 0; r < masked; ++r) {
    const std::size_t id = order[r];
    ckm.measured[id] = 0;
    ckm.estimate_sinr_db[id] = nan;
    ckm.variance[id] = nan;
  }
  return ckm;
}

/// Outage indicator: truth for measured grids, estimate otherwise (strict <).
inline bool is_outage(const ChannelKnowledgeMap& ckm, std::size_t id) {
  const double v = ckm.is_measured(id) ? ckm.truth_sinr_db[id] : ckm.estimate_sinr_db[id];
  return v < ckm.gamma_th_db;
}

inline bool is_outage(const ChannelKnowledgeMap& ckm, const GridIndex& idx) {
  ckm.spec.require(idx, "is_outage");
  return is_outage(ckm, ckm.spec.linear(idx));
}

}  // namespace ckmnav
