#pragma once

// JSON configuration, map persistence and CSV result files.
//
// Number formatting never consults the C/C++ locale: values go through
// std::to_chars / std::from_chars.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "ckmnav/ckm.hpp"
#include "ckmnav/env.hpp"
#include "ckmnav/errors.hpp"
#include "ckmnav/grid.hpp"
#include "ckmnav/kriging.hpp"
#include "ckmnav/sim.hpp"

namespace ckmnav::io {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// 9 significant digits, '.' decimal point.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 9);
  return std::string(buf.data(), r.ptr);
}

/// Shortest representation that parses back to the same double.
inline std::string fmt_exact(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

inline double parse_double(const std::string& s, const std::string& what) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw SchemaError(what + ": cannot parse number '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw SchemaError(what + ": cannot parse integer '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + p.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + p.string() + "'");
}

inline json read_json(const std::filesystem::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::parse_error& e) {
    throw SchemaError(p.string() + ": invalid JSON: " + e.what());
  }
}

/// Two-space indented, keys sorted, trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Schema helpers
// ---------------------------------------------------------------------------

inline const json& field(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object()) throw SchemaError(ctx + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(ctx + ": missing field '" + key + "'");
  return *it;
}

template <class T>
T get(const json& j, const char* key, const std::string& ctx) {
  const json& v = field(j, key, ctx);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw SchemaError(ctx + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, const T& fallback, const std::string& ctx) {
  if (!j.is_object()) throw SchemaError(ctx + ": expected an object");
  if (!j.contains(key)) return fallback;
  return get<T>(j, key, ctx);
}

inline std::string join(const std::string& ctx, const char* key) { return ctx + "." + key; }

// ---------------------------------------------------------------------------
// Environment and scenario
// ---------------------------------------------------------------------------

inline json to_json(const Bounds& b) {
  return {{"x", {b.x_lo, b.x_hi}}, {"y", {b.y_lo, b.y_hi}}, {"z", {b.z_lo, b.z_hi}}};
}

inline Bounds bounds_from_json(const json& j, const std::string& ctx) {
  auto pair = [&](const char* key) {
    const auto v = get<std::vector<double>>(j, key, ctx);
    if (v.size() != 2) throw SchemaError(ctx + ": field '" + key + "' must be [lo, hi]");
    return v;
  };
  const auto x = pair("x"), y = pair("y"), z = pair("z");
  Bounds b{x[0], x[1], y[0], y[1], z[0], z[1]};
  if (b.empty()) throw SchemaError(ctx + ": bounds are empty");
  return b;
}

inline json to_json(const AntennaConfig& a) {
  return {{"n_elements", a.n_elements},
          {"downtilt_deg", a.downtilt_deg},
          {"hpbw_deg", a.hpbw_deg},
          {"null_floor_db", a.null_floor_db}};
}

inline AntennaConfig antenna_from_json(const json& j, const std::string& ctx) {
  AntennaConfig a;
  a.n_elements = get_or(j, "n_elements", a.n_elements, ctx);
  a.downtilt_deg = get_or(j, "downtilt_deg", a.downtilt_deg, ctx);
  a.hpbw_deg = get_or(j, "hpbw_deg", a.hpbw_deg, ctx);
  a.null_floor_db = get_or(j, "null_floor_db", a.null_floor_db, ctx);
  a.validate();
  return a;
}

inline json to_json(const RadioConfig& r) {
  return {{"carrier_hz", r.carrier_hz},
          {"bandwidth_hz", r.bandwidth_hz},
          {"noise_dbm", r.noise_dbm},
          {"los_exponent", r.los_exponent},
          {"nlos_exponent", r.nlos_exponent},
          {"nlos_extra_loss_db", r.nlos_extra_loss_db},
          {"reference_distance_m", r.reference_distance_m}};
}

inline RadioConfig radio_from_json(const json& j, const std::string& ctx) {
  RadioConfig r;
  r.carrier_hz = get_or(j, "carrier_hz", r.carrier_hz, ctx);
  r.bandwidth_hz = get_or(j, "bandwidth_hz", r.bandwidth_hz, ctx);
  r.noise_dbm = get_or(j, "noise_dbm", r.noise_dbm, ctx);
  r.los_exponent = get_or(j, "los_exponent", r.los_exponent, ctx);
  r.nlos_exponent = get_or(j, "nlos_exponent", r.nlos_exponent, ctx);
  r.nlos_extra_loss_db = get_or(j, "nlos_extra_loss_db", r.nlos_extra_loss_db, ctx);
  r.reference_distance_m = get_or(j, "reference_distance_m", r.reference_distance_m, ctx);
  r.validate();
  return r;
}

inline json to_json(const UrbanScenario& sc) {
  json buildings = json::array();
  for (const auto& b : sc.buildings)
    buildings.push_back({{"x", {b.x_lo, b.x_hi}}, {"y", {b.y_lo, b.y_hi}}, {"height", b.height}});
  json stations = json::array();
  for (const auto& s : sc.stations)
    stations.push_back({{"position", {s.position.x, s.position.y, s.position.z}},
                        {"tx_power_dbm", s.tx_power_dbm},
                        {"antenna", to_json(s.array)}});
  return {{"format", "ckmnav-scenario"},
          {"version", 1},
          {"bounds", to_json(sc.bounds)},
          {"buildings", buildings},
          {"stations", stations},
          {"radio", to_json(sc.radio)},
          {"seed", sc.seed}};
}

inline UrbanScenario scenario_from_json(const json& j) {
  const std::string ctx = "scenario";
  UrbanScenario sc;
  sc.bounds = bounds_from_json(field(j, "bounds", ctx), join(ctx, "bounds"));
  const auto& blds = field(j, "buildings", ctx);
  if (!blds.is_array()) throw SchemaError(ctx + ": field 'buildings' must be an array");
  for (std::size_t n = 0; n < blds.size(); ++n) {
    const std::string c = ctx + ".buildings[" + std::to_string(n) + "]";
    const auto x = get<std::vector<double>>(blds[n], "x", c);
    const auto y = get<std::vector<double>>(blds[n], "y", c);
    if (x.size() != 2 || y.size() != 2) throw SchemaError(c + ": footprint must be [lo, hi]");
    sc.buildings.push_back({x[0], x[1], y[0], y[1], get<double>(blds[n], "height", c)});
  }
  const auto& sts = field(j, "stations", ctx);
  if (!sts.is_array()) throw SchemaError(ctx + ": field 'stations' must be an array");
  for (std::size_t n = 0; n < sts.size(); ++n) {
    const std::string c = ctx + ".stations[" + std::to_string(n) + "]";
    const auto p = get<std::vector<double>>(sts[n], "position", c);
    if (p.size() != 3) throw SchemaError(c + ": field 'position' must be [x, y, z]");
    BaseStation bs;
    bs.position = {p[0], p[1], p[2]};
    bs.tx_power_dbm = get<double>(sts[n], "tx_power_dbm", c);
    if (sts[n].contains("antenna")) bs.array = antenna_from_json(sts[n]["antenna"], join(c, "antenna"));
    sc.stations.push_back(bs);
  }
  sc.radio = j.contains("radio") ? radio_from_json(j["radio"], join(ctx, "radio")) : RadioConfig{};
  sc.seed = get_or<std::uint64_t>(j, "seed", 0, ctx);
  sc.validate();
  return sc;
}

/// Inputs of gen-env.
struct EnvConfig {
  Bounds bounds;
  ItuParams itu;
  StationLayout stations;
  std::vector<BaseStation> explicit_stations;  // used instead of the layout when non-empty
  RadioConfig radio;
  std::uint64_t seed = 0;
};

inline EnvConfig env_config_from_json(const json& j) {
  const std::string ctx = "env";
  EnvConfig c;
  c.bounds = bounds_from_json(field(j, "bounds", ctx), join(ctx, "bounds"));
  c.seed = get<std::uint64_t>(j, "seed", ctx);
  if (j.contains("itu")) {
    const auto& it = j["itu"];
    const std::string ic = join(ctx, "itu");
    c.itu.alpha = get_or(it, "alpha", c.itu.alpha, ic);
    c.itu.beta_per_km2 = get_or(it, "beta_per_km2", c.itu.beta_per_km2, ic);
    c.itu.gamma_m = get_or(it, "gamma_m", c.itu.gamma_m, ic);
    if (it.contains("count")) c.itu.fixed_count = get<std::size_t>(it, "count", ic);
    c.itu.validate();
  }
  const auto& st = field(j, "stations", ctx);
  const std::string sctx = join(ctx, "stations");
  if (st.is_array()) {
    json wrapper = {{"bounds", to_json(c.bounds)}, {"buildings", json::array()}, {"stations", st}};
    c.explicit_stations = scenario_from_json(wrapper).stations;
  } else {
    c.stations.count = get<std::size_t>(st, "count", sctx);
    c.stations.height_m = get_or(st, "height_m", c.stations.height_m, sctx);
    c.stations.tx_power_dbm = get_or(st, "tx_power_dbm", c.stations.tx_power_dbm, sctx);
    if (st.contains("antenna")) c.stations.array = antenna_from_json(st["antenna"], join(sctx, "antenna"));
  }
  if (j.contains("radio")) c.radio = radio_from_json(j["radio"], join(ctx, "radio"));
  return c;
}

/// Buildings and station positions come from independent seed streams.
inline UrbanScenario generate_scenario(const EnvConfig& c) {
  UrbanScenario sc;
  sc.bounds = c.bounds;
  sc.radio = c.radio;
  sc.seed = c.seed;
  sc.buildings = generate_buildings(c.itu, c.bounds, derive_seed(c.seed, 1));
  sc.stations = c.explicit_stations.empty() ? place_stations(c.stations, c.bounds, derive_seed(c.seed, 2))
                                            : c.explicit_stations;
  sc.validate();
  return sc;
}

// ---------------------------------------------------------------------------
// Channel knowledge map files: a JSON header next to a CSV body
// ---------------------------------------------------------------------------

inline json to_json(const GridSpec& g) {
  return {{"bounds", to_json(g.bounds)}, {"delta_d", g.delta_d}, {"ni", g.ni}, {"nj", g.nj}, {"nk", g.nk}};
}

inline GridSpec gridspec_from_json(const json& j, const std::string& ctx) {
  const GridSpec g = GridSpec::from_bounds(bounds_from_json(field(j, "bounds", ctx), join(ctx, "bounds")),
                                           get<double>(j, "delta_d", ctx));
  if (j.contains("ni") && (get<int>(j, "ni", ctx) != g.ni || get<int>(j, "nj", ctx) != g.nj ||
                           get<int>(j, "nk", ctx) != g.nk))
    throw SchemaError(ctx + ": ni/nj/nk disagree with bounds and delta_d");
  return g;
}

inline json to_json(const SemivariogramModel& m) {
  return {{"nugget", m.nugget}, {"partial_sill", m.partial_sill}, {"range_m", m.range_m}};
}

inline SemivariogramModel model_from_json(const json& j, const std::string& ctx) {
  SemivariogramModel m{get<double>(j, "nugget", ctx), get<double>(j, "partial_sill", ctx),
                       get<double>(j, "range_m", ctx)};
  m.validate();
  return m;
}

struct StoredMap {
  ChannelKnowledgeMap map;
  SemivariogramModel model;
  bool fit_degenerate = false;
  std::uint64_t mask_seed = 0;
  double mask_fraction = 0.0;
};

inline const std::vector<std::string> kCkmColumns = {"i", "j", "k", "truth_db", "measured",
                                                     "estimate_db", "variance", "assoc"};

inline std::string ckm_csv(const ChannelKnowledgeMap& m) {
  std::string out = "i,j,k,truth_db,measured,estimate_db,variance,assoc\n";
  for (std::size_t id = 0; id < m.size(); ++id) {
    const GridIndex g = m.spec.index(id);
    out += std::to_string(g.i) + ',' + std::to_string(g.j) + ',' + std::to_string(g.k) + ',' +
           fmt_exact(m.truth_sinr_db[id]) + ',' + (m.is_measured(id) ? "1" : "0") + ',' +
           fmt_exact(m.estimate_sinr_db[id]) + ',' + fmt_exact(m.variance[id]) + ',' +
           std::to_string(m.association[id]) + '\n';
  }
  return out;
}

/// Splits simple comma-separated text (no quoting) into rows.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    for (;;) {
      const std::size_t comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

/// Column positions for `required`, naming the first missing column.
inline std::map<std::string, std::size_t> require_columns(const std::vector<std::string>& header,
                                                          const std::vector<std::string>& required,
                                                          const std::string& ctx) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t c = 0; c < header.size(); ++c) pos[header[c]] = c;
  for (const auto& r : required)
    if (!pos.count(r)) throw SchemaError(ctx + ": missing column '" + r + "'");
  return pos;
}

/// Writes <path> (JSON header) and <path stem>.csv.
inline void save_map(const std::filesystem::path& path, const StoredMap& s) {
  std::filesystem::path csv = path;
  csv.replace_extension(".csv");
  json h = {{"format", "ckmnav-ckm"},
            {"version", 1},
            {"grid", to_json(s.map.spec)},
            {"gamma_th_db", s.map.gamma_th_db},
            {"model", to_json(s.model)},
            {"fit_degenerate", s.fit_degenerate},
            {"mask_fraction", s.mask_fraction},
            {"mask_seed", s.mask_seed},
            {"measured_count", s.map.measured_count()},
            {"data", csv.filename().string()}};
  write_text(csv, ckm_csv(s.map));
  write_text(path, dump(h));
}

inline StoredMap load_map(const std::filesystem::path& path) {
  const json h = read_json(path);
  const std::string ctx = "ckm";
  StoredMap s;
  s.map.spec = gridspec_from_json(field(h, "grid", ctx), join(ctx, "grid"));
  s.map.gamma_th_db = get<double>(h, "gamma_th_db", ctx);
  s.model = model_from_json(field(h, "model", ctx), join(ctx, "model"));
  s.fit_degenerate = get_or(h, "fit_degenerate", false, ctx);
  s.mask_fraction = get_or(h, "mask_fraction", 0.0, ctx);
  s.mask_seed = get_or<std::uint64_t>(h, "mask_seed", 0, ctx);
  const auto csv_path = path.parent_path() / get<std::string>(h, "data", ctx);
  const auto rows = parse_csv(read_text(csv_path));
  const std::string cctx = csv_path.filename().string();
  if (rows.empty()) throw SchemaError(cctx + ": empty file");
  const auto col = require_columns(rows[0], kCkmColumns, cctx);
  const std::size_t n = s.map.spec.size();
  if (rows.size() - 1 != n)
    throw SchemaError(cctx + ": expected " + std::to_string(n) + " rows, found " + std::to_string(rows.size() - 1));
  auto& m = s.map;
  m.truth_sinr_db.assign(n, 0.0);
  m.estimate_sinr_db.assign(n, 0.0);
  m.variance.assign(n, 0.0);
  m.measured.assign(n, 0);
  m.association.assign(n, 1);
  std::vector<std::uint8_t> seen(n, 0);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string rc = cctx + " row " + std::to_string(r);
    if (row.size() != rows[0].size()) throw SchemaError(rc + ": wrong number of columns");
    auto cell = [&](const char* name) { return row[col.at(name)]; };
    const GridIndex g{static_cast<int>(parse_int(cell("i"), rc)), static_cast<int>(parse_int(cell("j"), rc)),
                      static_cast<int>(parse_int(cell("k"), rc))};
    if (!m.spec.contains(g)) throw SchemaError(rc + ": grid index " + to_string(g) + " outside lattice");
    const std::size_t id = m.spec.linear(g);
    if (seen[id]) throw SchemaError(rc + ": duplicate grid " + to_string(g));
    seen[id] = 1;
    m.truth_sinr_db[id] = parse_double(cell("truth_db"), rc);
    m.measured[id] = parse_int(cell("measured"), rc) != 0 ? 1 : 0;
    m.estimate_sinr_db[id] = parse_double(cell("estimate_db"), rc);
    m.variance[id] = parse_double(cell("variance"), rc);
    m.association[id] = static_cast<int>(parse_int(cell("assoc"), rc));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Campaign and sweep configuration
// ---------------------------------------------------------------------------

inline json to_json(const GridIndex& g) { return json::array({g.i, g.j, g.k}); }

inline GridIndex grid_index_from_json(const json& j, const char* key, const std::string& ctx) {
  const auto v = get<std::vector<int>>(j, key, ctx);
  if (v.size() != 3) throw SchemaError(ctx + ": field '" + key + "' must be [i, j, k]");
  return {v[0], v[1], v[2]};
}

inline json to_json(const CampaignConfig& c) {
  return {{"rounds", c.rounds},
          {"planner", to_string(c.planner)},
          {"spp",
           {{"mu1", c.spp.mu1},
            {"mu2", c.spp.mu2},
            {"mode", to_string(c.spp_options.mode)},
            {"beam_width", c.spp_options.beam_width},
            {"budget_factor", c.spp_options.budget_factor}}},
          {"tsp",
           {{"n", c.tsp.n}, {"beta", c.tsp.beta}, {"corridor_m", c.tsp.corridor_m}, {"solver", to_string(c.tsp.solver)}}},
          {"start_policy", to_string(c.start_policy)},
          {"start", to_json(c.start)},
          {"end", to_json(c.end)},
          {"seed", c.seed},
          {"kriging", {{"n_max", c.kriging.n_max}, {"refit_each_round", c.refit_each_round}}},
          {"measurement_noise_db", c.measurement_noise_db},
          {"fading", to_string(c.fading)},
          {"fading_step_m", c.fading_step_m}};
}

inline CampaignConfig campaign_from_json(const json& j, const std::string& ctx = "campaign") {
  CampaignConfig c;
  c.rounds = get<std::size_t>(j, "rounds", ctx);
  c.planner = parse_planner(get<std::string>(j, "planner", ctx));
  if (j.contains("spp")) {
    const auto& s = j["spp"];
    const std::string sc = join(ctx, "spp");
    c.spp.mu1 = get_or(s, "mu1", c.spp.mu1, sc);
    c.spp.mu2 = get_or(s, "mu2", c.spp.mu2, sc);
    c.spp_options.mode = parse_spp_mode(get_or<std::string>(s, "mode", "automatic", sc));
    c.spp_options.beam_width = get_or(s, "beam_width", c.spp_options.beam_width, sc);
    c.spp_options.budget_factor = get_or(s, "budget_factor", c.spp_options.budget_factor, sc);
  }
  if (j.contains("tsp")) {
    const auto& t = j["tsp"];
    const std::string tc = join(ctx, "tsp");
    c.tsp.n = get_or(t, "n", c.tsp.n, tc);
    c.tsp.beta = get_or(t, "beta", c.tsp.beta, tc);
    c.tsp.corridor_m = get_or(t, "corridor_m", c.tsp.corridor_m, tc);
    c.tsp.solver = parse_tsp_solver(get_or<std::string>(t, "solver", "nn_2opt", tc));
  }
  c.start_policy = parse_start_policy(get_or<std::string>(j, "start_policy", "random_per_round", ctx));
  if (c.start_policy == StartPolicy::fixed || j.contains("start")) c.start = grid_index_from_json(j, "start", ctx);
  c.end = grid_index_from_json(j, "end", ctx);
  c.seed = get<std::uint64_t>(j, "seed", ctx);
  if (j.contains("kriging")) {
    const auto& k = j["kriging"];
    const std::string kc = join(ctx, "kriging");
    c.kriging.n_max = get_or(k, "n_max", c.kriging.n_max, kc);
    c.refit_each_round = get_or(k, "refit_each_round", c.refit_each_round, kc);
  }
  c.measurement_noise_db = get_or(j, "measurement_noise_db", c.measurement_noise_db, ctx);
  c.fading = parse_fading(get_or<std::string>(j, "fading", "rayleigh", ctx));
  c.fading_step_m = get_or(j, "fading_step_m", c.fading_step_m, ctx);
  return c;
}

struct SweepConfig {
  CampaignConfig base;
  bool single_round = true;
  std::vector<SweepPoint> points;
};

inline SweepPoint sweep_point_from_json(const json& j, const std::string& ctx) {
  static const std::vector<std::string> known = {"mu1", "mu2", "beta", "n"};
  if (!j.is_object()) throw SchemaError(ctx + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw SchemaError(ctx + ": unknown sweep parameter '" + key + "'");
  SweepPoint p;
  if (j.contains("mu1")) p.mu1 = get<double>(j, "mu1", ctx);
  if (j.contains("mu2")) p.mu2 = get<double>(j, "mu2", ctx);
  if (j.contains("beta")) p.beta = get<double>(j, "beta", ctx);
  if (j.contains("n")) p.n = get<std::size_t>(j, "n", ctx);
  return p;
}

/// Points are either listed ("points") or the cartesian product of value
/// lists ("grid"), iterated with the last key (alphabetical) fastest.
inline SweepConfig sweep_from_json(const json& j) {
  const std::string ctx = "sweep";
  SweepConfig s;
  s.base = campaign_from_json(field(j, "base", ctx), join(ctx, "base"));
  const auto mode = get_or<std::string>(j, "mode", "single_round", ctx);
  if (mode != "single_round" && mode != "campaign")
    throw SchemaError(ctx + ": field 'mode' must be single_round or campaign");
  s.single_round = mode == "single_round";
  if (j.contains("points")) {
    const auto& pts = j["points"];
    if (!pts.is_array()) throw SchemaError(ctx + ": field 'points' must be an array");
    for (std::size_t n = 0; n < pts.size(); ++n)
      s.points.push_back(sweep_point_from_json(pts[n], ctx + ".points[" + std::to_string(n) + "]"));
  } else if (j.contains("grid")) {
    const auto& g = j["grid"];
    const std::string gc = join(ctx, "grid");
    if (!g.is_object() || g.empty()) throw SchemaError(gc + ": expected a non-empty object");
    std::vector<json> combos{json::object()};
    for (const auto& [key, values] : g.items()) {
      if (!values.is_array() || values.empty())
        throw SchemaError(gc + ": field '" + key + "' must be a non-empty array");
      std::vector<json> next;
      for (const auto& base : combos)
        for (const auto& v : values) {
          json c = base;
          c[key] = v;
          next.push_back(c);
        }
      combos = std::move(next);
    }
    for (std::size_t n = 0; n < combos.size(); ++n)
      s.points.push_back(sweep_point_from_json(combos[n], gc + "[" + std::to_string(n) + "]"));
  } else {
    throw SchemaError(ctx + ": missing field 'points' (or 'grid')");
  }
  if (s.points.empty()) throw SchemaError(ctx + ": no sweep points");
  return s;
}

// ---------------------------------------------------------------------------
// Result CSVs
// ---------------------------------------------------------------------------

inline const std::vector<std::string> kWaypointColumns = {"r", "n", "i", "j", "k", "x", "y", "z"};

inline std::string waypoints_csv(const std::vector<Trajectory>& trajs, const GridSpec& spec) {
  std::string out = "r,n,i,j,k,x,y,z\n";
  for (const auto& t : trajs) {
    for (std::size_t n = 0; n < t.waypoints.size(); ++n) {
      const auto& g = t.waypoints[n];
      const Vec3 c = spec.center(g);
      out += std::to_string(t.round) + ',' + std::to_string(n + 1) + ',' + std::to_string(g.i) + ',' +
             std::to_string(g.j) + ',' + std::to_string(g.k) + ',' + fmt(c.x) + ',' + fmt(c.y) + ',' +
             fmt(c.z) + '\n';
    }
  }
  return out;
}

inline const std::vector<std::string> kMetricsColumns = {
    "round",     "start_i",   "start_j",         "start_k",           "end_i",     "end_j",
    "end_k",     "t_r",       "o_r",             "m_r",               "outage_fraction",
    "realized_outage_m",      "mse_after",       "measured_count",    "selected",  "fallback"};

inline std::string metrics_csv(const std::vector<RoundMetrics>& rounds) {
  std::string out;
  for (std::size_t c = 0; c < kMetricsColumns.size(); ++c) out += (c ? "," : "") + kMetricsColumns[c];
  out += '\n';
  for (const auto& m : rounds) {
    out += std::to_string(m.round) + ',' + std::to_string(m.start.i) + ',' + std::to_string(m.start.j) + ',' +
           std::to_string(m.start.k) + ',' + std::to_string(m.end.i) + ',' + std::to_string(m.end.j) + ',' +
           std::to_string(m.end.k) + ',' + fmt(m.t_r) + ',' + fmt(m.o_r) + ',' + std::to_string(m.m_r) + ',' +
           fmt(m.outage_fraction) + ',' + fmt(m.realized_outage_m) + ',' + fmt(m.mse_after) + ',' +
           std::to_string(m.measured_count) + ',' + std::to_string(m.selected) + ',' +
           (m.fallback ? "1" : "0") + '\n';
  }
  return out;
}

inline const std::vector<std::string> kSweepColumns = {
    "point", "planner", "mu1", "mu2", "n", "beta", "rounds", "mean_t_r", "mean_o_r", "mean_m_r",
    "mean_mse", "mean_realized_outage_m", "error"};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out;
  for (std::size_t c = 0; c < kSweepColumns.size(); ++c) out += (c ? "," : "") + kSweepColumns[c];
  out += '\n';
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += std::to_string(r.index) + ',' + to_string(r.config.planner) + ',' + fmt(r.config.spp.mu1) + ',' +
           fmt(r.config.spp.mu2) + ',' + std::to_string(r.config.tsp.n) + ',' + fmt(r.config.tsp.beta) + ',' +
           std::to_string(r.rounds) + ',' + fmt(r.mean_t) + ',' + fmt(r.mean_o) + ',' + fmt(r.mean_m) + ',' +
           fmt(r.mean_mse) + ',' + fmt(r.mean_realized_outage) + ',' + err + '\n';
  }
  return out;
}

inline const std::vector<std::string> kSliceColumns = {"i", "j", "x", "y", "truth_db", "measured",
                                                       "estimate_db", "variance", "outage", "assoc"};

/// One altitude layer, rows ordered by j then i.
inline std::string slice_csv(const ChannelKnowledgeMap& m, int k) {
  if (k < 1 || k > m.spec.nk) throw InvalidArgument("slice: layer k=" + std::to_string(k) + " outside lattice");
  std::string out = "i,j,x,y,truth_db,measured,estimate_db,variance,outage,assoc\n";
  for (int j = 1; j <= m.spec.nj; ++j) {
    for (int i = 1; i <= m.spec.ni; ++i) {
      const GridIndex g{i, j, k};
      const std::size_t id = m.spec.linear(g);
      const Vec3 c = m.spec.center(g);
      out += std::to_string(i) + ',' + std::to_string(j) + ',' + fmt(c.x) + ',' + fmt(c.y) + ',' +
             fmt(m.truth_sinr_db[id]) + ',' + (m.is_measured(id) ? "1" : "0") + ',' +
             fmt(m.estimate_sinr_db[id]) + ',' + fmt(m.variance[id]) + ',' + (is_outage(m, id) ? "1" : "0") +
             ',' + std::to_string(m.association[id]) + '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical (sorted-key, compact) serialisation, so key order
/// in the source file does not matter.
inline std::string config_hash(const json& config) {
  const std::uint64_t h = fnv1a64(config.dump());
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(h));
  return buf.data();
}

struct RunManifest {
  std::string command;
  json config;
  json seeds = json::object();
  std::vector<std::string> outputs;
  json extra = json::object();
};

inline json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config_hash", config_hash(m.config)},
          {"config", m.config},
          {"seeds", m.seeds},
          {"outputs", m.outputs},
          {"summary", m.extra},
          {"tool_version", kToolVersion}};
}

}  // namespace ckmnav::io
