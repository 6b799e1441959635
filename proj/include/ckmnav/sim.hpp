#pragma once

// Multi-round measurement campaigns: plan, fly, measure, re-interpolate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ckmnav/ckm.hpp"
#include "ckmnav/env.hpp"
#include "ckmnav/errors.hpp"
#include "ckmnav/geom.hpp"
#include "ckmnav/kriging.hpp"
#include "ckmnav/parallel.hpp"
#include "ckmnav/random.hpp"
#include "ckmnav/spp.hpp"
#include "ckmnav/tsp.hpp"

namespace ckmnav {

enum class PlannerKind { spp, tsp };
enum class StartPolicy { fixed, random_per_round };
enum class FadingMode { rayleigh, none };

inline std::string to_string(PlannerKind p) { return p == PlannerKind::spp ? "spp" : "tsp"; }
inline std::string to_string(StartPolicy s) {
  return s == StartPolicy::fixed ? "fixed" : "random_per_round";
}
inline std::string to_string(FadingMode f) { return f == FadingMode::rayleigh ? "rayleigh" : "none"; }

inline PlannerKind parse_planner(const std::string& s) {
  if (s == "spp") return PlannerKind::spp;
  if (s == "tsp") return PlannerKind::tsp;
  throw InvalidArgument("unknown planner '" + s + "'");
}
inline StartPolicy parse_start_policy(const std::string& s) {
  if (s == "fixed") return StartPolicy::fixed;
  if (s == "random_per_round") return StartPolicy::random_per_round;
  throw InvalidArgument("unknown start policy '" + s + "'");
}
inline FadingMode parse_fading(const std::string& s) {
  if (s == "rayleigh") return FadingMode::rayleigh;
  if (s == "none") return FadingMode::none;
  throw InvalidArgument("unknown fading mode '" + s + "'");
}

struct CampaignConfig {
  std::size_t rounds = 20;
  PlannerKind planner = PlannerKind::spp;
  SppWeights spp;
  SppOptions spp_options;
  TspParams tsp;
  StartPolicy start_policy = StartPolicy::random_per_round;
  GridIndex start{1, 1, 1};
  GridIndex end{1, 1, 1};
  std::uint64_t seed = 1;
  KrigingOptions kriging;
  bool refit_each_round = false;
  double measurement_noise_db = 0.0;  // std-dev of additive measurement error
  FadingMode fading = FadingMode::rayleigh;
  double fading_step_m = 0.0;  // 0 = a fifth of the grid granularity

  void validate(const GridSpec& spec) const {
    if (rounds < 1) throw InvalidArgument("campaign: rounds must be >= 1");
    spec.require(end, "campaign end");
    if (start_policy == StartPolicy::fixed) {
      spec.require(start, "campaign start");
      if (start == end) throw InvalidArgument("campaign: start and end coincide");
    }
    if (spec.size() < 2) throw InvalidArgument("campaign: lattice needs at least 2 grids");
    spp.validate();
    if (planner == PlannerKind::tsp && tsp.n < 1) throw InvalidArgument("campaign: tsp.n must be >= 1");
    if (!(tsp.beta >= 0.0)) throw InvalidArgument("campaign: tsp.beta must be >= 0");
    if (!(measurement_noise_db >= 0.0))
      throw InvalidArgument("campaign: measurement_noise_db must be >= 0");
    if (!(fading_step_m >= 0.0)) throw InvalidArgument("campaign: fading_step_m must be >= 0");
  }
};

struct RoundMetrics {
  int round = 0;
  GridIndex start, end;
  double t_r = 0.0;
  double o_r = 0.0;
  std::size_t m_r = 0;
  double mse_after = 0.0;
  double realized_outage_m = 0.0;
  double outage_fraction = 0.0;
  std::size_t measured_count = 0;
  std::size_t selected = 0;  // TSP measurement-set size actually used
  bool fallback = false;
  Trajectory trajectory;
};

struct CampaignState {
  UrbanScenario scenario;
  ChannelKnowledgeMap map;
  SemivariogramModel model;
  int round = 0;
};

struct CampaignResult {
  double initial_mse = 0.0;
  std::vector<RoundMetrics> rounds;
};

/// Instantaneous SINR at p under one fading draw, dB. The serving station is
/// the one with the best expected SINR at p.
inline double instantaneous_sinr_db(const UrbanScenario& sc, const Vec3& p, Rng& rng, FadingMode fading) {
  const std::size_t m = sc.stations.size();
  std::vector<double> rx(m);
  std::size_t serving = 0;
  for (std::size_t s = 0; s < m; ++s) rx[s] = db_to_linear(mean_received_dbm(sc, sc.stations[s], p));
  for (std::size_t s = 1; s < m; ++s)
    if (rx[s] > rx[serving]) serving = s;
  double signal = 0.0, interference = 0.0;
  for (std::size_t s = 0; s < m; ++s) {
    const double h = fading == FadingMode::rayleigh ? sample_fading(rng) : 1.0;
    if (s == serving) signal = h * rx[s];
    else interference += h * rx[s];
  }
  return linear_to_db(signal / (interference + db_to_linear(sc.radio.noise_dbm)));
}

/// Flown length (meters) whose instantaneous SINR falls below the map's
/// threshold. Each segment is split into steps of at most step_m, evaluated
/// at the step midpoint.
inline double realize_outage(const Trajectory& traj, const UrbanScenario& sc, const ChannelKnowledgeMap& ckm,
                             Rng& rng, double step_m, FadingMode fading = FadingMode::rayleigh) {
  if (!(step_m > 0.0)) throw InvalidArgument("realize_outage: step_m must be > 0");
  double out = 0.0;
  for (std::size_t n = 0; n + 1 < traj.waypoints.size(); ++n) {
    const Vec3 a = ckm.spec.center(traj.waypoints[n]);
    const Vec3 b = ckm.spec.center(traj.waypoints[n + 1]);
    const double len = distance(a, b);
    if (!(len > 0.0)) continue;
    const auto steps = static_cast<std::size_t>(std::ceil(len / step_m - 1e-9));
    const double h = len / static_cast<double>(steps);
    for (std::size_t s = 0; s < steps; ++s) {
      const double t = (static_cast<double>(s) + 0.5) / static_cast<double>(steps);
      const Vec3 p = a + (b - a) * t;
      if (instantaneous_sinr_db(sc, p, rng, fading) < ckm.gamma_th_db) out += h;
    }
  }
  return out;
}

namespace detail {

inline GridIndex draw_start(const GridSpec& spec, const GridIndex& end, Rng& rng) {
  for (;;) {
    const std::size_t id = rng.index(spec.size());
    const GridIndex g = spec.index(id);
    if (!(g == end)) return g;
  }
}

inline GridIndex round_start(const CampaignConfig& cfg, const GridSpec& spec, int round) {
  if (cfg.start_policy == StartPolicy::fixed) return cfg.start;
  Rng rng(derive_seed(cfg.seed, 0x5354415254ULL + static_cast<std::uint64_t>(round)));
  return draw_start(spec, cfg.end, rng);
}

struct RoundPlan {
  Trajectory trajectory;
  std::size_t selected = 0;
  bool fallback = false;
};

inline RoundPlan plan_round(const CampaignState& state, const CampaignConfig& cfg, const GridIndex& start,
                            int round) {
  RoundPlan out;
  if (cfg.planner == PlannerKind::spp) {
    const auto p = plan_spp(state.map, start, cfg.end, cfg.spp, cfg.spp_options);
    out.trajectory = p.trajectory;
    out.fallback = p.fallback;
    return out;
  }
  TspParams params = cfg.tsp;
  params.seed = derive_seed(cfg.seed, 0x545350ULL + static_cast<std::uint64_t>(round));
  const double corridor = params.corridor_m < 0.0 ? default_corridor_m(state.map.spec, start, cfg.end)
                                                  : params.corridor_m;
  const std::size_t available = corridor_candidates(state.map, corridor, start, cfg.end).size();
  params.n = std::min(params.n, available);
  if (params.n == 0) {
    // Nothing left to measure near the corridor: fly straight.
    out.trajectory.waypoints = {start, cfg.end};
    out.fallback = true;
    return out;
  }
  SelectionOptions sel{cfg.kriging.n_max, cfg.kriging.jobs};
  const auto p = plan_tsp(state.map, state.model, start, cfg.end, params, sel);
  out.trajectory = p.trajectory;
  out.selected = params.n;
  out.fallback = params.n < cfg.tsp.n;
  return out;
}

}  // namespace detail

/// One round from `start`: plan, score against the pre-round map, fly with
/// fading, measure every traversed grid, re-interpolate.
inline RoundMetrics run_round(CampaignState& state, const CampaignConfig& cfg, const GridIndex& start) {
  const int round = state.round + 1;
  RoundMetrics m;
  m.round = round;
  m.start = start;
  m.end = cfg.end;
  detail::RoundPlan plan;
  try {
    plan = detail::plan_round(state, cfg, start, round);
  } catch (const Error& e) {
    throw Error("round " + std::to_string(round) + ": " + e.what());
  }
  plan.trajectory.round = round;
  const std::vector<std::uint8_t> before = state.map.measured;
  const auto obj = eval_objectives(plan.trajectory, state.map, before);
  m.t_r = obj.t_r;
  m.o_r = obj.o_r;
  m.m_r = obj.m_r;
  m.outage_fraction = m.t_r > 0.0 ? std::clamp(m.o_r / m.t_r, 0.0, 1.0) : 0.0;
  m.selected = plan.selected;
  m.fallback = plan.fallback;

  Rng fading_rng(derive_seed(cfg.seed, 0x46414445ULL + static_cast<std::uint64_t>(round)));
  const double step = cfg.fading_step_m > 0.0 ? cfg.fading_step_m : state.map.spec.delta_d / 5.0;
  m.realized_outage_m = realize_outage(plan.trajectory, state.scenario, state.map, fading_rng, step, cfg.fading);

  Rng noise_rng(derive_seed(cfg.seed, 0x4e4f495345ULL + static_cast<std::uint64_t>(round)));
  for (auto id : traversed_ids(plan.trajectory, state.map.spec)) {
    if (state.map.is_measured(id)) continue;
    if (cfg.measurement_noise_db > 0.0) state.map.mark_measured(id, cfg.measurement_noise_db * noise_rng.normal());
    else state.map.mark_measured(id);
  }
  if (cfg.refit_each_round) {
    KrigingOptions ko = cfg.kriging;
    ko.fit_seed = derive_seed(cfg.seed, 0x464954ULL + static_cast<std::uint64_t>(round));
    const auto fit = fit_from_map(state.map, ko);
    if (!fit.degenerate) state.model = fit.model;
  }
  complete(state.map, state.model, cfg.kriging);
  m.mse_after = global_mse(state.map);
  m.measured_count = state.map.measured_count();
  m.trajectory = std::move(plan.trajectory);
  state.round = round;
  return m;
}

/// Runs cfg.rounds sequential rounds on the evolving map.
inline CampaignResult run_campaign(CampaignState state, const CampaignConfig& cfg) {
  cfg.validate(state.map.spec);
  CampaignResult res;
  res.initial_mse = global_mse(state.map);
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    const GridIndex start = detail::round_start(cfg, state.map.spec, state.round + 1);
    res.rounds.push_back(run_round(state, cfg, start));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Trade-off sweeps
// ---------------------------------------------------------------------------

/// Parameter overrides for one sweep point; unset fields keep the base value.
struct SweepPoint {
  std::optional<double> mu1, mu2, beta;
  std::optional<std::size_t> n;
};

struct SweepRow {
  std::size_t index = 0;
  CampaignConfig config;
  std::size_t rounds = 0;
  double mean_t = 0.0, mean_o = 0.0, mean_m = 0.0;
  double mean_mse = 0.0, mean_realized_outage = 0.0;
  std::string error;  // empty on success
};

inline CampaignConfig apply_point(CampaignConfig cfg, const SweepPoint& p) {
  if (p.mu1) cfg.spp.mu1 = *p.mu1;
  if (p.mu2) cfg.spp.mu2 = *p.mu2;
  if (p.beta) cfg.tsp.beta = *p.beta;
  if (p.n) cfg.tsp.n = *p.n;
  return cfg;
}

/// Evaluates every grid point from the same initial state. With
/// single_round, each point flies one round from the first round's start;
/// otherwise a full campaign runs per point. A failing point records its
/// error and the sweep continues.
inline std::vector<SweepRow> pareto_sweep(const CampaignState& initial, const CampaignConfig& base,
                                          const std::vector<SweepPoint>& grid, bool single_round = true,
                                          unsigned jobs = 1) {
  if (grid.empty()) throw InvalidArgument("pareto_sweep: empty parameter grid");
  std::vector<SweepRow> rows(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.index = i;
    row.config = apply_point(base, grid[i]);
    row.config.kriging.jobs = 1;
    try {
      std::vector<RoundMetrics> ms;
      if (single_round) {
        row.config.validate(initial.map.spec);
        CampaignState st = initial;
        ms.push_back(run_round(st, row.config, detail::round_start(row.config, st.map.spec, st.round + 1)));
      } else {
        ms = run_campaign(initial, row.config).rounds;
      }
      row.rounds = ms.size();
      for (const auto& m : ms) {
        row.mean_t += m.t_r;
        row.mean_o += m.o_r;
        row.mean_m += static_cast<double>(m.m_r);
        row.mean_mse += m.mse_after;
        row.mean_realized_outage += m.realized_outage_m;
      }
      const double k = static_cast<double>(ms.size());
      row.mean_t /= k;
      row.mean_o /= k;
      row.mean_m /= k;
      row.mean_mse /= k;
      row.mean_realized_outage /= k;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

}  // namespace ckmnav
