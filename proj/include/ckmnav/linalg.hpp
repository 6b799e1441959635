#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ckmnav/errors.hpp"

namespace ckmnav::linalg {

/// Row-major dense square matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * n_ + c]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// LU factorisation with partial pivoting. A pivot smaller than
/// `relative_tol * max|A|` is reported as a singular system.
class LuFactorization {
 public:
  explicit LuFactorization(SquareMatrix a, double relative_tol = 1e-12)
      : lu_(std::move(a)), perm_(lu_.size()) {
    const std::size_t n = lu_.size();
    const double threshold = relative_tol * lu_.max_abs();
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t pivot = col;
      double best = std::abs(lu_(col, col));
      for (std::size_t r = col + 1; r < n; ++r) {
        const double v = std::abs(lu_(r, col));
        if (v > best) {
          best = v;
          pivot = r;
        }
      }
      if (!(best > threshold)) throw SingularSystemError("linear system is singular");
      if (pivot != col) {
        for (std::size_t c = 0; c < n; ++c) std::swap(lu_(col, c), lu_(pivot, c));
        std::swap(perm_[col], perm_[pivot]);
      }
      const double inv = 1.0 / lu_(col, col);
      for (std::size_t r = col + 1; r < n; ++r) {
        const double f = lu_(r, col) * inv;
        lu_(r, col) = f;
        if (f == 0.0) continue;
        for (std::size_t c = col + 1; c < n; ++c) lu_(r, c) -= f * lu_(col, c);
      }
    }
  }

  std::vector<double> solve(std::span<const double> b) const {
    const std::size_t n = lu_.size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i) {
      double s = x[i];
      for (std::size_t c = 0; c < i; ++c) s -= lu_(i, c) * x[c];
      x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x[i];
      for (std::size_t c = i + 1; c < n; ++c) s -= lu_(i, c) * x[c];
      x[i] = s / lu_(i, i);
    }
    return x;
  }

 private:
  SquareMatrix lu_;
  std::vector<std::size_t> perm_;
};

}  // namespace ckmnav::linalg
