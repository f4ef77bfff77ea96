#pragma once
// Iterative 0/1 rounding of fractional marginals that keeps Σx = k exact and
// every feature-value count within |F| of its fractional target. With an
// objective vector c the rounding never lets ⟨c, x⟩ decrease. The randomized
// variant picks each step's sign so that E[x] stays at π.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "sortition/error.hpp"
#include "sortition/numerics/matrix.hpp"
#include "sortition/numerics/nullspace.hpp"
#include "sortition/numerics/random.hpp"
#include "sortition/schema.hpp"
#include "sortition/tolerances.hpp"

namespace sortition {

struct RoundingStats {
  std::size_t kernel_steps = 0;
  std::size_t dropped_redundant = 0;
  std::size_t dropped_small = 0;
};

namespace detail {

// Projection of c onto the kernel of a, or a kernel vector with ⟨c, v⟩ ≥ 0
// when the projection vanishes.
inline std::optional<std::vector<double>> ascent_direction(const numerics::Matrix &a,
                                                           std::span<const double> c) {
  auto basis = numerics::nullspace_basis(a);
  if (basis.empty())
    return std::nullopt;
  std::vector<std::vector<double>> ortho;
  for (auto &b : basis) {
    for (const auto &o : ortho) {
      const double d = numerics::dot(b, o);
      for (std::size_t j = 0; j < b.size(); ++j)
        b[j] -= d * o[j];
    }
    const double norm = std::sqrt(numerics::dot(b, b));
    if (norm < 1e-10)
      continue;
    for (double &x : b)
      x /= norm;
    ortho.push_back(std::move(b));
  }
  if (ortho.empty())
    return std::nullopt;
  std::vector<double> d(a.cols(), 0.0);
  for (const auto &o : ortho) {
    const double w = numerics::dot(c, o);
    for (std::size_t j = 0; j < d.size(); ++j)
      d[j] += w * o[j];
  }
  const double cn = numerics::norm_inf(c);
  if (numerics::norm_inf(d) > 1e-9 * std::max(1.0, cn) && cn > 0.0)
    return d;
  auto v = ortho.front();
  if (numerics::dot(c, v) < 0.0)
    for (double &x : v)
      x = -x;
  return v;
}

inline std::vector<std::uint8_t> round_impl(std::span<const double> pi, const Dataset &pool,
                                            std::optional<std::span<const double>> c,
                                            numerics::RandomStream *rng, RoundingStats *stats) {
  const std::size_t n = pi.size();
  if (n != pool.size())
    throw Error(ErrorKind::InvalidArgument, "marginal vector size does not match pool");
  if (c && c->size() != n)
    throw Error(ErrorKind::InvalidArgument, "objective vector size does not match pool");
  const auto &schema = pool.schema();
  const std::size_t F = schema.num_features();
  const std::size_t pairs = schema.num_pairs();
  const double snap = Tolerances::integrality_snap;

  double total = 0.0;
  for (double p : pi) {
    if (!(p >= -snap && p <= 1.0 + snap))
      throw Error(ErrorKind::InvalidArgument, "marginal outside [0, 1]");
    total += p;
  }
  const double k_real = std::round(total);
  if (std::abs(total - k_real) > 1e-6 * std::max(1.0, k_real))
    throw Error(ErrorKind::InvalidArgument, "marginals do not sum to an integer");

  RoundingStats local_stats;
  RoundingStats &st = stats ? *stats : local_stats;

  // Constraint 0 is Σx = k; constraint 1 + p is pair p.
  const std::size_t num_cons = 1 + pairs;
  std::vector<std::vector<std::size_t>> cons_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    cons_of[i].push_back(0);
    for (std::size_t f = 0; f < F; ++f)
      cons_of[i].push_back(1 + pool.pair_of(i, f));
  }

  std::vector<double> x(pi.begin(), pi.end());
  std::vector<bool> active(n, false);
  std::vector<std::size_t> active_count(num_cons, 0);
  std::vector<bool> live(num_cons, true);
  std::size_t n_active = 0;
  auto freeze = [&](std::size_t i, double value) {
    x[i] = value;
    if (!active[i])
      return;
    active[i] = false;
    --n_active;
    for (std::size_t con : cons_of[i])
      --active_count[con];
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] <= snap) {
      x[i] = 0.0;
    } else if (x[i] >= 1.0 - snap) {
      x[i] = 1.0;
    } else {
      active[i] = true;
      ++n_active;
      for (std::size_t con : cons_of[i])
        ++active_count[con];
    }
  }

  // Indices by decreasing c (ties by index), sorted once; each step filters
  // it down to the active set.
  std::vector<std::size_t> c_order;
  if (c) {
    c_order.resize(n);
    std::iota(c_order.begin(), c_order.end(), std::size_t{0});
    std::stable_sort(c_order.begin(), c_order.end(),
                     [&](std::size_t a, std::size_t b) { return (*c)[a] > (*c)[b]; });
  }

  std::vector<std::size_t> act, order, window, rows;
  while (n_active > 0) {
    rows.clear();
    for (std::size_t con = 0; con < num_cons; ++con)
      if (live[con] && (con == 0 || active_count[con] > 0))
        rows.push_back(con);
    const std::size_t m = rows.size();

    if (m < n_active) {
      // Any kernel vector of a column window, padded with zeros, is a kernel
      // vector of the full active system; m + 1 columns always suffice.
      window.clear();
      if (rng) {
        act.clear();
        for (std::size_t i = 0; i < n; ++i)
          if (active[i])
            act.push_back(i);
        for (std::size_t j = 0; j < m + 1; ++j)
          std::swap(act[j], act[j + rng->uniform_index(act.size() - j)]);
        window.assign(act.begin(), act.begin() + static_cast<std::ptrdiff_t>(m + 1));
        std::sort(window.begin(), window.end());
      } else if (!c) {
        act.clear();
        for (std::size_t i = 0; i < n && act.size() < m + 1; ++i)
          if (active[i])
            act.push_back(i);
        window = act;
      } else {
        const std::size_t w = std::min(n_active, 2 * (m + 1));
        order.clear();
        for (std::size_t i : c_order)
          if (active[i])
            order.push_back(i);
        const std::size_t top = (w + 1) / 2;
        window.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top));
        window.insert(window.end(), order.end() - static_cast<std::ptrdiff_t>(w - top),
                      order.end());
        std::sort(window.begin(), window.end());
      }
      std::vector<std::size_t> row_of(num_cons, m);
      for (std::size_t r = 0; r < m; ++r)
        row_of[rows[r]] = r;
      numerics::Matrix a(m, window.size(), 0.0);
      for (std::size_t j = 0; j < window.size(); ++j)
        for (std::size_t con : cons_of[window[j]])
          if (row_of[con] < m)
            a(row_of[con], j) = 1.0;

      std::optional<std::vector<double>> dir;
      if (!c) {
        dir = numerics::nullspace_direction(a);
      } else {
        std::vector<double> cw(window.size());
        for (std::size_t j = 0; j < window.size(); ++j)
          cw[j] = (*c)[window[j]];
        dir = detail::ascent_direction(a, cw);
      }
      if (!dir)
        throw Error(ErrorKind::NumericalFailure, "no kernel direction for a wide system");
      auto &v = *dir;
      const double vmax = numerics::norm_inf(v);
      if (!(vmax > 0.0))
        throw Error(ErrorKind::NumericalFailure, "zero kernel direction");
      for (double &e : v)
        e /= vmax;

      auto max_step = [&](std::size_t &hit) {
        double t = std::numeric_limits<double>::infinity();
        hit = window.size();
        for (std::size_t j = 0; j < window.size(); ++j) {
          const double xi = x[window[j]];
          double tj = std::numeric_limits<double>::infinity();
          if (v[j] > 0.0)
            tj = (1.0 - xi) / v[j];
          else if (v[j] < 0.0)
            tj = xi / -v[j];
          if (tj < t) {
            t = tj;
            hit = j;
          }
        }
        return t;
      };
      std::size_t hit;
      double t = max_step(hit);
      if (rng) {
        // Step +t with probability t'/(t + t'), else -t', so E[x] is unchanged.
        for (double &e : v)
          e = -e;
        std::size_t back_hit;
        const double back = max_step(back_hit);
        if (rng->uniform() * (t + back) < back) {
          for (double &e : v)
            e = -e;
        } else {
          t = back;
          hit = back_hit;
        }
      }
      if (hit == window.size() || t < 1e-12)
        throw Error(ErrorKind::NumericalFailure, "rounding step stalled");
      for (std::size_t j = 0; j < window.size(); ++j)
        x[window[j]] += t * v[j];
      x[window[hit]] = v[hit] > 0.0 ? 1.0 : 0.0;
      for (std::size_t j = 0; j < window.size(); ++j) {
        const std::size_t i = window[j];
        if (x[i] <= snap)
          freeze(i, 0.0);
        else if (x[i] >= 1.0 - snap)
          freeze(i, 1.0);
      }
      ++st.kernel_steps;
      continue;
    }

    bool dropped = false;
    for (std::size_t con = 1; con < num_cons; ++con)
      if (live[con] && active_count[con] == n_active) {
        live[con] = false;
        dropped = true;
        ++st.dropped_redundant;
      }
    if (dropped)
      continue;
    for (std::size_t con = 1; con < num_cons; ++con)
      if (live[con] && active_count[con] <= F) {
        live[con] = false;
        dropped = true;
        ++st.dropped_small;
      }
    if (dropped)
      continue;

    if (m == 1 && n_active == 1) {
      // Only Σx = k is left over one variable; exact arithmetic would make it
      // integral already, so what remains is drift.
      const auto i = static_cast<std::size_t>(
          std::find(active.begin(), active.end(), true) - active.begin());
      const double r = std::round(x[i]);
      if (std::abs(x[i] - r) > 1e-6)
        throw Error(ErrorKind::NumericalFailure, "residual fractional variable");
      freeze(i, r);
      continue;
    }
    throw Error(ErrorKind::NumericalFailure, "no constraint can be dropped");
  }

  std::vector<std::uint8_t> out(n);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] > 0.5 ? 1 : 0;
    ones += out[i];
  }
  if (static_cast<double>(ones) != k_real)
    throw Error(ErrorKind::NumericalFailure, "rounded panel has the wrong size");
  return out;
}

} // namespace detail

/// Rounds π (entries in [0,1], Σπ = k) to a 0/1 vector. `c`, when given, is an
/// objective whose value must not decrease.
inline std::vector<std::uint8_t>
beck_fiala_round(std::span<const double> pi, const Dataset &pool,
                 std::optional<std::span<const double>> c = std::nullopt,
                 RoundingStats *stats = nullptr) {
  return detail::round_impl(pi, pool, c, nullptr, stats);
}

/// Same guarantees as beck_fiala_round, with P[x_i = 1] = π_i.
inline std::vector<std::uint8_t> randomized_round(std::span<const double> pi,
                                                  const Dataset &pool,
                                                  numerics::RandomStream &rng,
                                                  RoundingStats *stats = nullptr) {
  return detail::round_impl(pi, pool, std::nullopt, &rng, stats);
}

} // namespace sortition
