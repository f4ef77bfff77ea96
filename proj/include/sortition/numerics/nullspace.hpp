#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "sortition/numerics/matrix.hpp"
#include "sortition/tolerances.hpp"

namespace sortition::numerics {

/// Reduced row echelon form by Gauss-Jordan elimination with partial
/// (row) pivoting, scanning columns left to right. Columns whose best pivot
/// is below `Tolerances::pivot` times the largest entry are free.
struct RowEchelon {
  Matrix reduced;
  std::vector<std::size_t> pivot_cols;
  std::vector<std::size_t> free_cols;
};

inline RowEchelon row_echelon(Matrix a) {
  const std::size_t m = a.rows(), n = a.cols();
  const double tol = Tolerances::pivot * std::max(1.0, a.max_abs());
  RowEchelon out;
  std::size_t r = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (r == m) {
      out.free_cols.push_back(c);
      continue;
    }
    std::size_t best = r;
    for (std::size_t i = r + 1; i < m; ++i)
      if (std::abs(a(i, c)) > std::abs(a(best, c)))
        best = i;
    if (std::abs(a(best, c)) <= tol) {
      out.free_cols.push_back(c);
      continue;
    }
    if (best != r)
      for (std::size_t j = 0; j < n; ++j)
        std::swap(a(r, j), a(best, j));
    const double inv = 1.0 / a(r, c);
    for (std::size_t j = c; j < n; ++j)
      a(r, j) *= inv;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == r)
        continue;
      const double factor = a(i, c);
      if (factor == 0.0)
        continue;
      for (std::size_t j = c; j < n; ++j)
        a(i, j) -= factor * a(r, j);
    }
    out.pivot_cols.push_back(c);
    ++r;
  }
  out.reduced = std::move(a);
  return out;
}

/// Kernel basis of `a`, one vector per free column (in column order).
inline std::vector<std::vector<double>> nullspace_basis(const Matrix &a) {
  const auto ech = row_echelon(a);
  std::vector<std::vector<double>> basis;
  basis.reserve(ech.free_cols.size());
  for (std::size_t fc : ech.free_cols) {
    std::vector<double> v(a.cols(), 0.0);
    v[fc] = 1.0;
    for (std::size_t r = 0; r < ech.pivot_cols.size(); ++r)
      v[ech.pivot_cols[r]] = -ech.reduced(r, fc);
    basis.push_back(std::move(v));
  }
  return basis;
}

/// Scales v to unit infinity norm with its first nonzero entry positive.
inline void orient_positive(std::vector<double> &v) {
  const double scale = norm_inf(v);
  if (scale == 0.0)
    return;
  double sign = 1.0;
  for (double x : v)
    if (x != 0.0) {
      sign = x > 0.0 ? 1.0 : -1.0;
      break;
    }
  for (double &x : v)
    x *= sign / scale;
}

/// First kernel basis vector of `a`, normalised and positively oriented, or
/// nullopt if the kernel is trivial.
inline std::optional<std::vector<double>> nullspace_direction(const Matrix &a) {
  auto basis = nullspace_basis(a);
  if (basis.empty())
    return std::nullopt;
  auto v = std::move(basis.front());
  orient_positive(v);
  return v;
}

} // namespace sortition::numerics
