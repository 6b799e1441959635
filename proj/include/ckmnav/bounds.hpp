#pragma once

#include "ckmnav/vec3.hpp"

namespace ckmnav {

/// Axis-aligned box [x_lo,x_hi] x [y_lo,y_hi] x [z_lo,z_hi], meters.
struct Bounds {
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;
  double z_lo = 0.0, z_hi = 0.0;

  double dx() const { return x_hi - x_lo; }
  double dy() const { return y_hi - y_lo; }
  double dz() const { return z_hi - z_lo; }

  double ground_area_m2() const { return dx() * dy(); }
  bool empty() const { return !(dx() > 0.0 && dy() > 0.0 && dz() > 0.0); }

  Vec3 lower() const { return {x_lo, y_lo, z_lo}; }
  Vec3 upper() const { return {x_hi, y_hi, z_hi}; }

  bool contains(const Vec3& p) const {
    return p.x >= x_lo && p.x <= x_hi && p.y >= y_lo && p.y <= y_hi &&
           p.z >= z_lo && p.z <= z_hi;
  }

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

}  // namespace ckmnav
