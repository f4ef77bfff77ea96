#pragma once
// Builds a distribution over quota-respecting panels whose marginals match π
// by column generation on
//
//   min δ  s.t.  |π_i − Σ_{B∋i} λ_B| ≤ δ,  Σ λ_B = 1,  λ ≥ 0.
//
// New panels come from the objective-constrained rounding with c = z, where
// z are the optimal multipliers of the per-agent rows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "sortition/error.hpp"
#include "sortition/marginals.hpp"
#include "sortition/numerics/random.hpp"
#include "sortition/numerics/simplex.hpp"
#include "sortition/rounding/beck_fiala.hpp"
#include "sortition/rounding/panel.hpp"
#include "sortition/schema.hpp"

namespace sortition {

struct ColumnGenerationOptions {
  double epsilon = 1e-6;
  /// Defaults to 10·|P|.
  std::optional<std::size_t> max_iterations;
  /// Panels from randomized rounding added before the first solve; defaults
  /// to 2·|P|. Their mean is π, so with about 2·|P| of them π usually sits
  /// inside their hull and the separation loop only has a residual to fix.
  std::optional<std::size_t> seed_panels;
  std::uint64_t seed = 0;
};

/// Per-round trace, mostly for tests and diagnostics.
struct ColumnGenerationTrace {
  std::vector<double> deltas;
  /// ⟨π, z⟩ − ẑ per round, which equals δ at an LP optimum.
  std::vector<double> dual_objectives;
  /// Σ_{i∈B} z_i − ẑ of the panel generated in each round.
  std::vector<double> violations;
  /// Cumulative simplex pivots and refactorizations after each round.
  std::vector<std::size_t> pivots;
  std::vector<std::size_t> refactorizations;
};

/// Checks a panel against the quotas and against |count − target| ≤ |F|.
inline void verify_panel(const Panel &panel, std::span<const double> targets,
                         const QuotaSet &quotas, std::size_t num_features) {
  const double F = static_cast<double>(num_features);
  for (std::size_t p = 0; p < targets.size(); ++p) {
    if (std::abs(static_cast<double>(panel.seat_counts[p]) - targets[p]) > F + 1e-6)
      throw Error(ErrorKind::QuotaViolation,
                  "panel deviates from its target by more than |F| on pair " +
                      std::to_string(p));
  }
  if (quotas.size() != 0 && !quotas.satisfied_by(panel.seat_counts))
    throw Error(ErrorKind::QuotaViolation, "panel violates the seat quotas");
}

inline PanelDistribution build_panel_distribution(std::span<const double> pi,
                                                  const Dataset &pool,
                                                  const QuotaSet &quotas,
                                                  const ColumnGenerationOptions &opt = {},
                                                  ColumnGenerationTrace *trace = nullptr) {
  const std::size_t n = pi.size();
  if (n == 0)
    throw Error(ErrorKind::EmptyPool, "pool is empty");
  if (n != pool.size())
    throw Error(ErrorKind::InvalidArgument, "marginal vector size does not match pool");
  if (!(opt.epsilon > 0.0))
    throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  const std::size_t F = pool.schema().num_features();
  const auto targets = pair_sums(pool, pi);
  const std::size_t cap = opt.max_iterations.value_or(10 * n);

  PanelDistribution dist;
  dist.epsilon = opt.epsilon;

  auto add_panel = [&](std::vector<std::uint8_t> x) -> const Panel & {
    dist.panels.push_back(panel_from_indicator(pool, x));
    verify_panel(dist.panels.back(), targets, quotas, F);
    return dist.panels.back();
  };

  add_panel(beck_fiala_round(pi, pool));
  dist.weights = {1.0};
  dist.max_marginal_error = max_marginal_error(dist, pi);
  if (dist.max_marginal_error < opt.epsilon)
    return dist;

  // Rows: U_i (0..n-1), L_i (n..2n-1), S (2n).
  std::vector<double> rhs(2 * n + 1);
  for (std::size_t i = 0; i < n; ++i)
    rhs[i] = rhs[n + i] = pi[i];
  rhs[2 * n] = 1.0;
  numerics::BoundedSimplex lp(rhs);
  numerics::SparseColumn delta_col;
  delta_col.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i)
    delta_col.push_back({i, -1.0});
  for (std::size_t i = 0; i < n; ++i)
    delta_col.push_back({n + i, 1.0});
  const std::size_t delta_var = lp.add_column(1.0, std::move(delta_col), 0.0, numerics::kInf);
  for (std::size_t i = 0; i < n; ++i)
    lp.add_column(0.0, {{i, 1.0}}, 0.0, numerics::kInf);
  for (std::size_t i = 0; i < n; ++i)
    lp.add_column(0.0, {{n + i, -1.0}}, 0.0, numerics::kInf);

  std::vector<std::size_t> panel_var;
  auto add_lambda = [&](const Panel &panel) {
    numerics::SparseColumn col;
    col.reserve(2 * panel.members.size() + 1);
    for (std::size_t i : panel.members)
      col.push_back({i, 1.0});
    for (std::size_t i : panel.members)
      col.push_back({n + i, 1.0});
    col.push_back({2 * n, 1.0});
    panel_var.push_back(lp.add_column(0.0, std::move(col), 0.0, numerics::kInf));
  };
  std::set<std::vector<std::size_t>> seen{dist.panels.front().members};
  add_lambda(dist.panels.front());
  auto rng = numerics::split_stream(opt.seed, 1);
  const std::size_t seeds = opt.seed_panels.value_or(2 * n);
  for (std::size_t s = 0; s < seeds; ++s) {
    const Panel &panel = add_panel(randomized_round(pi, pool, rng));
    if (!seen.insert(panel.members).second) {
      dist.panels.pop_back();
      continue;
    }
    add_lambda(panel);
  }
  dist.weights.assign(dist.panels.size(), 0.0);

  auto read_weights = [&] {
    std::vector<double> w(panel_var.size());
    double total = 0.0;
    for (std::size_t b = 0; b < w.size(); ++b)
      total += w[b] = std::max(0.0, lp.value(panel_var[b]));
    if (!(total > 0.0))
      throw Error(ErrorKind::NumericalFailure, "panel weights vanished");
    for (double &x : w)
      x /= total;
    dist.weights = std::move(w);
    dist.max_marginal_error = max_marginal_error(dist, pi);
  };

  for (std::size_t round = 1;; ++round) {
    if (lp.solve() != numerics::LpStatus::optimal)
      throw Error(ErrorKind::NumericalFailure, "restricted master problem not optimal");
    read_weights();
    dist.iterations = round;
    const double delta = lp.value(delta_var);
    const auto y = lp.row_duals();
    std::vector<double> z(n);
    double dual_obj = y[2 * n];
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = y[i] + y[n + i];
      dual_obj += pi[i] * z[i];
    }
    const double z_hat = -y[2 * n];
    if (trace) {
      trace->deltas.push_back(delta);
      trace->dual_objectives.push_back(dual_obj);
      trace->pivots.push_back(lp.iterations());
      trace->refactorizations.push_back(lp.refactorizations());
    }
    if (dist.max_marginal_error < opt.epsilon)
      break;
    if (round > cap)
      throw Error(ErrorKind::IterationLimit,
                  "column generation did not reach epsilon within " + std::to_string(cap) +
                      " rounds (error " + std::to_string(dist.max_marginal_error) + ")");

    const auto x = beck_fiala_round(pi, pool, std::span<const double>(z));
    const Panel &panel = add_panel(x);
    if (trace) {
      double s = -z_hat;
      for (std::size_t i : panel.members)
        s += z[i];
      trace->violations.push_back(s);
    }
    if (!seen.insert(panel.members).second) {
      dist.panels.pop_back();
      throw Error(ErrorKind::Stalled, "generated panel is already in the support (error " +
                                          std::to_string(dist.max_marginal_error) + ")");
    }
    add_lambda(panel);
    dist.weights.push_back(0.0);
  }

  // Keep only the support.
  PanelDistribution out;
  out.epsilon = dist.epsilon;
  out.iterations = dist.iterations;
  for (std::size_t b = 0; b < dist.panels.size(); ++b)
    if (dist.weights[b] > 0.0) {
      out.panels.push_back(std::move(dist.panels[b]));
      out.weights.push_back(dist.weights[b]);
    }
  out.max_marginal_error = max_marginal_error(out, pi);
  return out;
}

} // namespace sortition
