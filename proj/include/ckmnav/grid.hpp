#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdlib>
#include <string>

#include "ckmnav/bounds.hpp"
#include "ckmnav/errors.hpp"
#include "ckmnav/vec3.hpp"

namespace ckmnav {

/// 1-based lattice index (i along x, j along y, k along z).
struct GridIndex {
  int i = 1;
  int j = 1;
  int k = 1;

  friend auto operator<=>(const GridIndex&, const GridIndex&) = default;
};

inline std::string to_string(const GridIndex& g) {
  return "(" + std::to_string(g.i) + "," + std::to_string(g.j) + "," + std::to_string(g.k) + ")";
}

inline int manhattan(const GridIndex& a, const GridIndex& b) {
  return std::abs(a.i - b.i) + std::abs(a.j - b.j) + std::abs(a.k - b.k);
}

/// Uniform cubic discretisation of a bounding box.
struct GridSpec {
  Bounds bounds;
  double delta_d = 10.0;
  int ni = 0;
  int nj = 0;
  int nk = 0;

  static GridSpec from_bounds(const Bounds& b, double delta_d) {
    if (!(delta_d > 0.0)) throw InvalidArgument("grid: delta_d must be > 0");
    if (b.empty()) throw InvalidArgument("grid: bounds are empty");
    GridSpec g;
    g.bounds = b;
    g.delta_d = delta_d;
    // Guard against ceil(10.000000000000002) style rounding.
    auto cells = [delta_d](double extent) {
      const double q = extent / delta_d;
      const double r = std::round(q);
      return static_cast<int>(std::abs(q - r) < 1e-9 ? r : std::ceil(q));
    };
    g.ni = cells(b.dx());
    g.nj = cells(b.dy());
    g.nk = cells(b.dz());
    return g;
  }

  std::size_t size() const {
    return static_cast<std::size_t>(ni) * static_cast<std::size_t>(nj) *
           static_cast<std::size_t>(nk);
  }

  double sphere_radius() const { return 0.5 * delta_d; }

  bool contains(const GridIndex& g) const {
    return g.i >= 1 && g.i <= ni && g.j >= 1 && g.j <= nj && g.k >= 1 && g.k <= nk;
  }

  std::size_t linear(const GridIndex& g) const {
    return static_cast<std::size_t>(g.i - 1) +
           static_cast<std::size_t>(ni) *
               (static_cast<std::size_t>(g.j - 1) +
                static_cast<std::size_t>(nj) * static_cast<std::size_t>(g.k - 1));
  }

  GridIndex index(std::size_t id) const {
    const auto nis = static_cast<std::size_t>(ni);
    const auto njs = static_cast<std::size_t>(nj);
    return {static_cast<int>(id % nis) + 1, static_cast<int>((id / nis) % njs) + 1,
            static_cast<int>(id / (nis * njs)) + 1};
  }

  Vec3 center(const GridIndex& g) const {
    return {bounds.x_lo + delta_d * (g.i - 0.5), bounds.y_lo + delta_d * (g.j - 0.5),
            bounds.z_lo + delta_d * (g.k - 0.5)};
  }

  Vec3 center(std::size_t id) const { return center(index(id)); }

  void require(const GridIndex& g, const char* what) const {
    if (!contains(g))
      throw InvalidArgument(std::string(what) + ": grid index " + to_string(g) +
                            " outside lattice");
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline Vec3 grid_center(const GridSpec& spec, const GridIndex& idx) {
  spec.require(idx, "grid_center");
  return spec.center(idx);
}

}  // namespace ckmnav
