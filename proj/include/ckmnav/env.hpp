#pragma once

// Synthetic urban radio environment: ITU-style building layout, ground base
// stations with downtilted uniform linear arrays, log-distance path loss with
// a LoS/NLoS split, and unit-mean small-scale fading.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ckmnav/bounds.hpp"
#include "ckmnav/errors.hpp"
#include "ckmnav/random.hpp"
#include "ckmnav/vec3.hpp"

namespace ckmnav {

struct Building {
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;
  double height = 0.0;  // roof above ground (z = 0)

  friend bool operator==(const Building&, const Building&) = default;
};

struct AntennaConfig {
  int n_elements = 8;
  double downtilt_deg = 10.0;
  double hpbw_deg = 65.0;
  double null_floor_db = 30.0;

  void validate() const {
    if (n_elements < 1) throw InvalidArgument("antenna: n_elements must be >= 1");
    if (!(hpbw_deg > 0.0 && hpbw_deg < 180.0))
      throw InvalidArgument("antenna: hpbw_deg must be in (0, 180)");
    if (!(null_floor_db > 0.0))
      throw InvalidArgument("antenna: null_floor_db must be > 0");
  }

  friend bool operator==(const AntennaConfig&, const AntennaConfig&) = default;
};

struct BaseStation {
  Vec3 position;
  double tx_power_dbm = 40.0;
  AntennaConfig array;

  friend bool operator==(const BaseStation&, const BaseStation&) = default;
};

struct RadioConfig {
  double carrier_hz = 3e9;
  double bandwidth_hz = 1e6;
  double noise_dbm = -110.0;
  double los_exponent = 2.2;
  double nlos_exponent = 3.5;
  double nlos_extra_loss_db = 20.0;
  double reference_distance_m = 1.0;

  /// Free-space loss at the reference distance (Friis).
  double reference_loss_db() const {
    constexpr double c = 299792458.0;
    return 20.0 * std::log10(4.0 * std::numbers::pi * reference_distance_m *
                             carrier_hz / c);
  }

  void validate() const {
    if (!(carrier_hz > 0.0)) throw InvalidArgument("radio: carrier_hz must be > 0");
    if (!std::isfinite(noise_dbm)) throw InvalidArgument("radio: noise_dbm must be finite");
    if (!(reference_distance_m > 0.0))
      throw InvalidArgument("radio: reference_distance_m must be > 0");
  }

  friend bool operator==(const RadioConfig&, const RadioConfig&) = default;
};

/// Statistical building model parameters: built-up land ratio, building
/// density per km^2, and Rayleigh height scale.
struct ItuParams {
  double alpha = 0.3;
  double beta_per_km2 = 300.0;
  double gamma_m = 50.0;
  std::optional<std::size_t> fixed_count;  // overrides the Poisson draw

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("itu: alpha must be in (0, 1]");
    if (!(beta_per_km2 > 0.0)) throw InvalidArgument("itu: beta_per_km2 must be > 0");
    if (!(gamma_m > 0.0)) throw InvalidArgument("itu: gamma_m must be > 0");
  }

  /// Side of the square footprint, meters.
  double building_width_m() const { return 1000.0 * std::sqrt(alpha / beta_per_km2); }
};

struct UrbanScenario {
  Bounds bounds;
  std::vector<Building> buildings;
  std::vector<BaseStation> stations;
  RadioConfig radio;
  std::uint64_t seed = 0;

  void validate() const {
    if (bounds.empty()) throw InvalidArgument("scenario: bounds are empty");
    if (stations.empty()) throw InvalidArgument("scenario: at least one station required");
    for (const auto& bs : stations) {
      if (!(bs.position.z > 0.0)) throw InvalidArgument("scenario: station height must be > 0");
      if (!std::isfinite(bs.tx_power_dbm))
        throw InvalidArgument("scenario: station tx power must be finite");
      bs.array.validate();
    }
    radio.validate();
  }
};

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Draws one building layout. Count is Poisson with mean beta * area; footprints
/// are squares of the model width centred uniformly and clipped to the bounds
/// (overlaps allowed); heights are Rayleigh(gamma) truncated to (0, z_hi].
inline std::vector<Building> generate_buildings(const ItuParams& itu, const Bounds& bounds,
                                                std::uint64_t seed) {
  if (!(bounds.ground_area_m2() > 0.0))
    throw InvalidArgument("generate_buildings: bounds have zero ground area");
  if (!(bounds.z_hi > 0.0))
    throw InvalidArgument("generate_buildings: z_hi must be above ground");
  itu.validate();

  Rng rng(seed);
  std::size_t count = 0;
  if (itu.fixed_count) {
    count = *itu.fixed_count;
  } else {
    // Poisson by counting unit-rate arrivals inside [0, mean].
    const double mean = itu.beta_per_km2 * bounds.ground_area_m2() / 1e6;
    double t = rng.exponential();
    while (t <= mean) {
      ++count;
      t += rng.exponential();
    }
  }

  const double half = 0.5 * itu.building_width_m();
  std::vector<Building> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const double cx = rng.uniform(bounds.x_lo, bounds.x_hi);
    const double cy = rng.uniform(bounds.y_lo, bounds.y_hi);
    double h = 0.0;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      h = rng.rayleigh(itu.gamma_m);
      if (h > 0.0 && h <= bounds.z_hi) break;
    }
    h = std::clamp(h, std::nextafter(0.0, 1.0), bounds.z_hi);
    Building b;
    b.x_lo = std::max(bounds.x_lo, cx - half);
    b.x_hi = std::min(bounds.x_hi, cx + half);
    b.y_lo = std::max(bounds.y_lo, cy - half);
    b.y_hi = std::min(bounds.y_hi, cy + half);
    b.height = h;
    out.push_back(b);
  }
  return out;
}

struct StationLayout {
  std::size_t count = 3;
  double height_m = 25.0;
  double tx_power_dbm = 40.0;
  AntennaConfig array;
};

/// Uniform horizontal placement of identical stations.
inline std::vector<BaseStation> place_stations(const StationLayout& layout, const Bounds& bounds,
                                               std::uint64_t seed) {
  if (layout.count == 0) throw InvalidArgument("place_stations: count must be >= 1");
  Rng rng(seed);
  std::vector<BaseStation> out;
  out.reserve(layout.count);
  for (std::size_t m = 0; m < layout.count; ++m) {
    BaseStation bs;
    bs.position = {rng.uniform(bounds.x_lo, bounds.x_hi), rng.uniform(bounds.y_lo, bounds.y_hi),
                   layout.height_m};
    bs.tx_power_dbm = layout.tx_power_dbm;
    bs.array = layout.array;
    out.push_back(bs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Radio quantities
// ---------------------------------------------------------------------------

namespace detail {

// Open segment p-q against the open box of one building (slab method).
inline bool segment_hits_building(const Vec3& p, const Vec3& q, const Building& b) {
  const double lo[3] = {b.x_lo, b.y_lo, 0.0};
  const double hi[3] = {b.x_hi, b.y_hi, b.height};
  const double ps[3] = {p.x, p.y, p.z};
  const double qs[3] = {q.x, q.y, q.z};
  double t_lo = 0.0;
  double t_hi = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double d = qs[a] - ps[a];
    if (d == 0.0) {
      if (!(ps[a] > lo[a] && ps[a] < hi[a])) return false;
      continue;
    }
    double t1 = (lo[a] - ps[a]) / d;
    double t2 = (hi[a] - ps[a]) / d;
    if (t1 > t2) std::swap(t1, t2);
    t_lo = std::max(t_lo, t1);
    t_hi = std::min(t_hi, t2);
    if (!(t_lo < t_hi)) return false;
  }
  return t_lo < t_hi;
}

inline bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.z < b.z;
}

}  // namespace detail

/// True iff the open segment p-q crosses no building interior. Touching a
/// face, edge or roof counts as clear.
inline bool is_los(const Vec3& p, const Vec3& q, const std::vector<Building>& buildings) {
  // Evaluate in a canonical direction so the answer is exactly symmetric.
  const Vec3& a = detail::lex_less(q, p) ? q : p;
  const Vec3& b = detail::lex_less(q, p) ? p : q;
  for (const auto& bld : buildings) {
    if (detail::segment_hits_building(a, b, bld)) return false;
  }
  return true;
}

/// Large-scale gain in dB (negative path loss).
inline double path_gain_db(const BaseStation& bs, const Vec3& p, bool los,
                           const RadioConfig& radio) {
  const double d = distance(bs.position, p);
  if (!(d > 0.0)) throw InvalidArgument("path_gain_db: receiver co-located with station");
  const double n = los ? radio.los_exponent : radio.nlos_exponent;
  double loss = radio.reference_loss_db() + 10.0 * n * std::log10(d / radio.reference_distance_m);
  if (!los) loss += radio.nlos_extra_loss_db;
  return -loss;
}

/// Angle of p below the station's horizon, degrees (negative above).
inline double depression_angle_deg(const BaseStation& bs, const Vec3& p) {
  const double rho = std::hypot(p.x - bs.position.x, p.y - bs.position.y);
  return std::atan2(bs.position.z - p.z, rho) * 180.0 / std::numbers::pi;
}

/// Element pattern -min(12 (dtheta / hpbw)^2, G0), dB.
inline double element_pattern_db(double off_boresight_deg, const AntennaConfig& array) {
  const double r = off_boresight_deg / array.hpbw_deg;
  return -std::min(12.0 * r * r, array.null_floor_db);
}

/// Array factor power of a vertical half-wavelength ULA steered to the
/// downtilt, normalised by the element count (peak = N), in dB. Nulls are
/// floored at -G0.
inline double array_factor_db(double depression_deg, const AntennaConfig& array) {
  const double n = array.n_elements;
  const double to_rad = std::numbers::pi / 180.0;
  const double psi = std::numbers::pi * (std::sin(depression_deg * to_rad) -
                                         std::sin(array.downtilt_deg * to_rad));
  const double s = std::sin(0.5 * psi);
  double power = n * n;
  if (std::abs(s) > 1e-12) {
    const double num = std::sin(0.5 * n * psi);
    power = (num * num) / (s * s);
  }
  const double floor_lin = std::pow(10.0, -array.null_floor_db / 10.0);
  return 10.0 * std::log10(std::max(power / n, floor_lin));
}

inline double beam_gain_db(const BaseStation& bs, const Vec3& p) {
  if (p == bs.position) throw InvalidArgument("beam_gain_db: point at station position");
  const double theta = depression_angle_deg(bs, p);
  return element_pattern_db(theta - bs.array.downtilt_deg, bs.array) +
         array_factor_db(theta, bs.array);
}

/// Rayleigh-fading power gain: unit-mean exponential, strictly positive.
inline double sample_fading(Rng& rng) { return rng.exponential(); }

/// Average received power P * B * G in dBm, including the LoS test.
inline double mean_received_dbm(const UrbanScenario& sc, const BaseStation& bs, const Vec3& p) {
  const bool los = is_los(bs.position, p, sc.buildings);
  return bs.tx_power_dbm + path_gain_db(bs, p, los, sc.radio) + beam_gain_db(bs, p);
}

}  // namespace ckmnav
