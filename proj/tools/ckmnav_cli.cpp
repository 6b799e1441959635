// ckmnav command-line front end.
//
//   ckmnav gen-env       --config env.json --out scenario.json
//   ckmnav build-ckm     --config build.json --out ckm.json
//   ckmnav plan          --ckm ckm.json --planner spp --start 1,1,1 --end 9,9,2 --out wp.csv
//   ckmnav campaign      --config campaign.json --out metrics.csv
//   ckmnav sweep         --config sweep.json --out sweep.csv
//   ckmnav export-slices --ckm ckm.json --out-dir slices/
//
// A flag overrides the config key of the same name. CKM_NAV_SEED, when set,
// replaces every seed.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ckmnav/ckmnav.hpp"

namespace fs = std::filesystem;
using ckmnav::io::json;

namespace {

std::optional<std::uint64_t> seed_override() {
  const char* v = std::getenv("CKM_NAV_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ckmnav::InvalidArgument("CKM_NAV_SEED must be an unsigned integer");
  }
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  return ckmnav::io::read_json(path);
}

// Relative paths inside a config resolve against the config's directory.
std::string resolve(const std::string& config_path, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || config_path.empty()) return p;
  return (fs::path(config_path).parent_path() / p).lexically_normal().string();
}

json parse_index(const std::string& s, const char* what) {
  std::vector<int> v;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string part = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ckmnav::InvalidArgument(std::string(what) + ": expected i,j,k but got '" + s + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (v.size() != 3) throw ckmnav::InvalidArgument(std::string(what) + ": expected i,j,k but got '" + s + "'");
  return json::array({v[0], v[1], v[2]});
}

void write_manifest(const std::string& out, ckmnav::io::RunManifest m) {
  m.outputs.insert(m.outputs.begin(), out);
  ckmnav::io::write_text(out + ".manifest.json", ckmnav::io::dump(ckmnav::io::to_json(m)));
}

// Flags that mirror campaign config keys.
struct CampaignFlags {
  std::optional<std::size_t> rounds;
  std::optional<std::string> planner, start_policy, start, end, spp_mode, solver, fading;
  std::optional<double> mu1, mu2, beta, corridor, budget_factor, noise;
  std::optional<std::size_t> n, n_max, beam_width;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--rounds", rounds, "number of rounds");
    app->add_option("--planner", planner, "spp or tsp");
    app->add_option("--mu1", mu1, "outage weight (spp)");
    app->add_option("--mu2", mu2, "measurement reward, <= 0 (spp)");
    app->add_option("--spp-mode", spp_mode, "automatic, floyd, bellman_ford or prize_greedy");
    app->add_option("--budget-factor", budget_factor, "prize_greedy step budget / L1 distance");
    app->add_option("--beam-width", beam_width, "prize_greedy beam width");
    app->add_option("--n", n, "measurement-set size (tsp)");
    app->add_option("--beta", beta, "outage weight in tour edges (tsp)");
    app->add_option("--corridor", corridor, "candidate corridor half-width, meters (tsp; <0 = default)");
    app->add_option("--solver", solver, "nn_2opt, sim_anneal or brute_force (tsp)");
    app->add_option("--start-policy", start_policy, "fixed or random_per_round");
    app->add_option("--start", start, "start grid i,j,k");
    app->add_option("--end", end, "end grid i,j,k");
    app->add_option("--seed", seed, "campaign seed");
    app->add_option("--n-max", n_max, "Kriging neighbourhood cap (0 = all)");
    app->add_option("--noise-db", noise, "measurement noise std-dev, dB");
    app->add_option("--fading", fading, "rayleigh or none");
  }

  void apply(json& c) const {
    if (rounds) c["rounds"] = *rounds;
    if (planner) c["planner"] = *planner;
    if (mu1) c["spp"]["mu1"] = *mu1;
    if (mu2) c["spp"]["mu2"] = *mu2;
    if (spp_mode) c["spp"]["mode"] = *spp_mode;
    if (budget_factor) c["spp"]["budget_factor"] = *budget_factor;
    if (beam_width) c["spp"]["beam_width"] = *beam_width;
    if (n) c["tsp"]["n"] = *n;
    if (beta) c["tsp"]["beta"] = *beta;
    if (corridor) c["tsp"]["corridor_m"] = *corridor;
    if (solver) c["tsp"]["solver"] = *solver;
    if (start_policy) c["start_policy"] = *start_policy;
    if (start) c["start"] = parse_index(*start, "--start");
    if (end) c["end"] = parse_index(*end, "--end");
    if (seed) c["seed"] = *seed;
    if (n_max) c["kriging"]["n_max"] = *n_max;
    if (noise) c["measurement_noise_db"] = *noise;
    if (fading) c["fading"] = *fading;
  }
};

int cmd_gen_env(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
  json c = load_config(config);
  if (seed) c["seed"] = *seed;
  if (auto s = seed_override()) c["seed"] = *s;
  const auto sc = ckmnav::io::generate_scenario(ckmnav::io::env_config_from_json(c));
  ckmnav::io::write_text(out, ckmnav::io::dump(ckmnav::io::to_json(sc)));
  ckmnav::io::RunManifest m{"gen-env", c, {{"env", sc.seed}}, {}, {{"buildings", sc.buildings.size()}}};
  write_manifest(out, m);
  std::cout << "wrote " << out << " (" << sc.buildings.size() << " buildings, " << sc.stations.size()
            << " stations)\n";
  return 0;
}

struct BuildFlags {
  std::optional<std::string> scenario;
  std::optional<double> delta_d, gamma_th, mask;
  std::optional<std::uint64_t> mask_seed;
  std::optional<std::size_t> n_max;
};

int cmd_build_ckm(const std::string& config, const BuildFlags& f, const std::string& out, unsigned jobs) {
  json c = load_config(config);
  if (c.contains("scenario")) c["scenario"] = resolve(config, c["scenario"].get<std::string>());
  if (f.scenario) c["scenario"] = *f.scenario;
  if (f.delta_d) c["delta_d"] = *f.delta_d;
  if (f.gamma_th) c["gamma_th_db"] = *f.gamma_th;
  if (f.mask) c["mask_fraction"] = *f.mask;
  if (f.mask_seed) c["mask_seed"] = *f.mask_seed;
  if (f.n_max) c["kriging"]["n_max"] = *f.n_max;
  if (auto s = seed_override()) c["mask_seed"] = *s;
  const std::string ctx = "build-ckm";
  namespace io = ckmnav::io;
  const auto sc = io::scenario_from_json(io::read_json(io::get<std::string>(c, "scenario", ctx)));
  const double delta = io::get<double>(c, "delta_d", ctx);
  const double gamma = io::get<double>(c, "gamma_th_db", ctx);
  const double mask = io::get<double>(c, "mask_fraction", ctx);
  const auto mask_seed = io::get<std::uint64_t>(c, "mask_seed", ctx);
  ckmnav::KrigingOptions ko;
  if (c.contains("kriging")) {
    ko.n_max = io::get_or(c["kriging"], "n_max", ko.n_max, ctx + ".kriging");
    ko.max_fit_points = io::get_or(c["kriging"], "max_fit_points", ko.max_fit_points, ctx + ".kriging");
  }
  ko.fit_seed = ckmnav::derive_seed(mask_seed, 3);
  ko.jobs = jobs;
  const auto spec = ckmnav::GridSpec::from_bounds(sc.bounds, delta);
  const auto truth = ckmnav::build_ground_truth(sc, spec, gamma, jobs);
  const auto partial = ckmnav::make_partial(truth, mask, mask_seed, ko);
  io::StoredMap stored{partial.map, partial.fit.model, partial.fit.degenerate, mask_seed, mask};
  io::save_map(out, stored);
  const double mse = ckmnav::global_mse(partial.map);
  fs::path csv = out;
  csv.replace_extension(".csv");
  io::RunManifest m{"build-ckm", c, {{"mask_seed", mask_seed}, {"scenario_seed", sc.seed}},
                    {csv.string()},
                    {{"grids", spec.size()},
                     {"measured", partial.map.measured_count()},
                     {"mse", mse},
                     {"model", io::to_json(partial.fit.model)},
                     {"fit_degenerate", partial.fit.degenerate},
                     {"clamped_variances", partial.stats.clamped}}};
  write_manifest(out, m);
  std::cout << "wrote " << out << " (" << spec.ni << "x" << spec.nj << "x" << spec.nk << ", "
            << partial.map.measured_count() << " measured, MSE " << io::fmt(mse) << " dB^2)\n";
  return 0;
}

int cmd_plan(const std::string& ckm_path, const std::string& config, const CampaignFlags& f,
             const std::string& out, unsigned jobs) {
  namespace io = ckmnav::io;
  json c = load_config(config);
  if (!c.contains("rounds")) c["rounds"] = 1;
  if (!c.contains("seed")) c["seed"] = 0;
  f.apply(c);
  c["start_policy"] = "fixed";
  if (auto s = seed_override()) c["seed"] = *s;
  auto cfg = io::campaign_from_json(c, "plan");
  cfg.kriging.jobs = jobs;
  const auto stored = io::load_map(ckm_path);
  cfg.validate(stored.map.spec);
  json summary;
  ckmnav::Trajectory traj;
  if (cfg.planner == ckmnav::PlannerKind::spp) {
    const auto p = ckmnav::plan_spp(stored.map, cfg.start, cfg.end, cfg.spp, cfg.spp_options);
    traj = p.trajectory;
    summary["total_weight"] = p.total_weight;
    summary["solver_mode"] = ckmnav::to_string(p.solver_mode);
    summary["fallback"] = p.fallback;
  } else {
    ckmnav::TspParams params = cfg.tsp;
    params.seed = cfg.seed;
    const auto p = ckmnav::plan_tsp(stored.map, stored.model, cfg.start, cfg.end, params,
                                    {cfg.kriging.n_max, jobs});
    traj = p.trajectory;
    summary["total_weight"] = p.tour.total_weight;
    summary["set_objective"] = p.set.objective;
    summary["candidates"] = p.set.candidates;
  }
  traj.round = 1;
  const auto obj = ckmnav::eval_objectives(traj, stored.map, stored.map.measured);
  summary["t_r"] = obj.t_r;
  summary["o_r"] = obj.o_r;
  summary["m_r"] = obj.m_r;
  summary["waypoints"] = traj.waypoints.size();
  io::write_text(out, io::waypoints_csv({traj}, stored.map.spec));
  write_manifest(out, {"plan", c, {{"seed", cfg.seed}}, {}, summary});
  std::cout << summary.dump() << "\n";
  return 0;
}

struct Inputs {
  ckmnav::CampaignState state;
  std::string scenario_path, ckm_path;
};

Inputs load_inputs(json& c, const std::string& config, const std::optional<std::string>& scenario,
                   const std::optional<std::string>& ckm, const std::string& ctx) {
  namespace io = ckmnav::io;
  if (c.contains("scenario")) c["scenario"] = resolve(config, c["scenario"].get<std::string>());
  if (c.contains("ckm")) c["ckm"] = resolve(config, c["ckm"].get<std::string>());
  if (scenario) c["scenario"] = *scenario;
  if (ckm) c["ckm"] = *ckm;
  Inputs in;
  in.scenario_path = io::get<std::string>(c, "scenario", ctx);
  in.ckm_path = io::get<std::string>(c, "ckm", ctx);
  const auto stored = io::load_map(in.ckm_path);
  in.state.scenario = io::scenario_from_json(io::read_json(in.scenario_path));
  in.state.map = stored.map;
  in.state.model = stored.model;
  return in;
}

int cmd_campaign(const std::string& config, const CampaignFlags& f, const std::optional<std::string>& scenario,
                 const std::optional<std::string>& ckm, const std::string& out,
                 const std::optional<std::string>& waypoints, unsigned jobs) {
  namespace io = ckmnav::io;
  json c = load_config(config);
  f.apply(c);
  if (auto s = seed_override()) c["seed"] = *s;
  auto in = load_inputs(c, config, scenario, ckm, "campaign");
  auto cfg = io::campaign_from_json(c);
  cfg.kriging.jobs = jobs;
  const auto res = ckmnav::run_campaign(in.state, cfg);
  io::write_text(out, io::metrics_csv(res.rounds));
  io::RunManifest m{"campaign", c, {{"seed", cfg.seed}}, {}, {{"initial_mse", res.initial_mse}}};
  if (waypoints) {
    std::vector<ckmnav::Trajectory> trajs;
    for (const auto& r : res.rounds) trajs.push_back(r.trajectory);
    io::write_text(*waypoints, io::waypoints_csv(trajs, in.state.map.spec));
    m.outputs.push_back(*waypoints);
  }
  if (!res.rounds.empty()) m.extra["final_mse"] = res.rounds.back().mse_after;
  write_manifest(out, m);
  std::cout << "wrote " << out << " (" << res.rounds.size() << " rounds, MSE " << io::fmt(res.initial_mse)
            << " -> " << io::fmt(res.rounds.back().mse_after) << ")\n";
  return 0;
}

int cmd_sweep(const std::string& config, const std::optional<std::string>& scenario,
              const std::optional<std::string>& ckm, const std::string& out, unsigned jobs) {
  namespace io = ckmnav::io;
  json c = load_config(config);
  if (auto s = seed_override()) {
    if (c.contains("base")) c["base"]["seed"] = *s;
  }
  auto in = load_inputs(c, config, scenario, ckm, "sweep");
  const auto sw = io::sweep_from_json(c);
  const auto rows = ckmnav::pareto_sweep(in.state, sw.base, sw.points, sw.single_round, jobs);
  io::write_text(out, io::sweep_csv(rows));
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
  write_manifest(out, {"sweep", c, {{"seed", sw.base.seed}}, {}, {{"points", rows.size()}, {"failed", failed}}});
  std::cout << "wrote " << out << " (" << rows.size() << " points, " << failed << " failed)\n";
  return 0;
}

int cmd_export_slices(const std::string& ckm, const std::vector<int>& layers, const std::string& out_dir) {
  namespace io = ckmnav::io;
  const auto stored = io::load_map(ckm);
  std::vector<int> ks = layers;
  if (ks.empty())
    for (int k = 1; k <= stored.map.spec.nk; ++k) ks.push_back(k);
  io::RunManifest m{"export-slices", {{"ckm", ckm}, {"layers", ks}}, json::object(), {}, json::object()};
  for (int k : ks) {
    const auto path = (fs::path(out_dir) / ("slice_k" + std::to_string(k) + ".csv")).string();
    io::write_text(path, io::slice_csv(stored.map, k));
    m.outputs.push_back(path);
  }
  m.extra = {{"ni", stored.map.spec.ni}, {"nj", stored.map.spec.nj}, {"gamma_th_db", stored.map.gamma_th_db}};
  io::write_text((fs::path(out_dir) / "slices.manifest.json").string(), io::dump(io::to_json(m)));
  std::cout << "wrote " << ks.size() << " slices to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV navigation and channel-knowledge-map completion simulator"};
  app.require_subcommand(1);
  unsigned jobs = ckmnav::default_jobs();
  app.add_option("--jobs", jobs, "worker threads for parallel-safe steps (default: core count)");

  std::string config, out, ckm_path, out_dir;
  std::optional<std::uint64_t> env_seed;
  auto* gen = app.add_subcommand("gen-env", "generate an urban scenario");
  gen->add_option("--config", config, "environment config JSON")->required();
  gen->add_option("--seed", env_seed, "scenario seed");
  gen->add_option("--out", out, "scenario JSON to write")->required();

  BuildFlags bf;
  auto* build = app.add_subcommand("build-ckm", "evaluate, mask and complete a channel knowledge map");
  build->add_option("--config", config, "build config JSON");
  build->add_option("--scenario", bf.scenario, "scenario JSON");
  build->add_option("--delta-d", bf.delta_d, "grid granularity, meters");
  build->add_option("--gamma-th", bf.gamma_th, "outage threshold, dB");
  build->add_option("--mask", bf.mask, "fraction of grids left unmeasured");
  build->add_option("--mask-seed", bf.mask_seed, "masking seed");
  build->add_option("--n-max", bf.n_max, "Kriging neighbourhood cap (0 = all)");
  build->add_option("--out", out, "map header JSON to write (CSV body goes next to it)")->required();

  CampaignFlags plan_flags;
  auto* plan = app.add_subcommand("plan", "plan one flight on a stored map");
  plan->add_option("--ckm", ckm_path, "map header JSON")->required();
  plan->add_option("--config", config, "campaign-style config JSON");
  plan_flags.add(plan);
  plan->add_option("--out", out, "waypoint CSV to write")->required();

  CampaignFlags camp_flags;
  std::optional<std::string> scenario, ckm, waypoints;
  auto* camp = app.add_subcommand("campaign", "run a multi-round campaign");
  camp->add_option("--config", config, "campaign config JSON")->required();
  camp->add_option("--scenario", scenario, "scenario JSON");
  camp->add_option("--ckm", ckm, "initial map header JSON");
  camp_flags.add(camp);
  camp->add_option("--waypoints", waypoints, "also write every round's waypoints");
  camp->add_option("--out", out, "metrics CSV to write")->required();

  auto* sweep = app.add_subcommand("sweep", "trade-off sweep over planner parameters");
  sweep->add_option("--config", config, "sweep config JSON")->required();
  sweep->add_option("--scenario", scenario, "scenario JSON");
  sweep->add_option("--ckm", ckm, "initial map header JSON");
  sweep->add_option("--out", out, "sweep CSV to write")->required();

  std::vector<int> layers;
  auto* slices = app.add_subcommand("export-slices", "write per-altitude CSV slices of a map");
  slices->add_option("--ckm", ckm_path, "map header JSON")->required();
  slices->add_option("--k", layers, "layers to export (default: all)");
  slices->add_option("--out-dir", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (jobs == 0) jobs = 1;
  try {
    if (*gen) return cmd_gen_env(config, env_seed, out);
    if (*build) return cmd_build_ckm(config, bf, out, jobs);
    if (*plan) return cmd_plan(ckm_path, config, plan_flags, out, jobs);
    if (*camp) return cmd_campaign(config, camp_flags, scenario, ckm, out, waypoints, jobs);
    if (*sweep) return cmd_sweep(config, scenario, ckm, out, jobs);
    if (*slices) return cmd_export_slices(ckm_path, layers, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
