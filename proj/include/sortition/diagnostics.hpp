#pragma once
// Model diagnostics: pool versus background composition, the hypothetical
// pool implied by the model, feature-pair intersections and q histograms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sortition/error.hpp"
#include "sortition/learning.hpp"
#include "sortition/schema.hpp"

namespace sortition {

struct CompositionRow {
  std::size_t pair = 0;
  double pool_fraction = 0.0;
  double background_fraction = 0.0;
};

/// Per pair: fraction of the pool and weighted fraction of the background.
inline std::vector<CompositionRow> composition(const Dataset &pool, const Dataset &background) {
  if (!(pool.schema() == background.schema()))
    throw Error(ErrorKind::SchemaMismatch, "pool and background use different schemas");
  const auto &schema = pool.schema();
  std::vector<double> pc(schema.num_pairs(), 0.0), bc(schema.num_pairs(), 0.0);
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t f = 0; f < schema.num_features(); ++f)
      pc[pool.pair_of(i, f)] += 1.0;
  for (std::size_t i = 0; i < background.size(); ++i)
    for (std::size_t f = 0; f < schema.num_features(); ++f)
      bc[background.pair_of(i, f)] += background.agent(i).weight;
  const double pn = static_cast<double>(pool.size()), bw = background.total_weight();
  std::vector<CompositionRow> rows;
  for (std::size_t p = 0; p < schema.num_pairs(); ++p)
    rows.push_back({p, pn > 0 ? pc[p] / pn : 0.0, bw > 0 ? bc[p] / bw : 0.0});
  return rows;
}

/// Expected pool count per pair if every background record joined with its
/// predicted probability: Σ_{i∈B: attribute} w_i·q̂_i.
inline std::vector<double> hypothetical_pool(const Dataset &background,
                                             const ParticipationModel &model) {
  const auto q = predict_q(model, background);
  const auto &schema = background.schema();
  std::vector<double> out(schema.num_pairs(), 0.0);
  for (std::size_t i = 0; i < background.size(); ++i)
    for (std::size_t f = 0; f < schema.num_features(); ++f)
      out[background.pair_of(i, f)] += background.agent(i).weight * q[i];
  return out;
}

struct IntersectionRow {
  std::size_t pair_a = 0, pair_b = 0;
  double pool_fraction = 0.0;
  double hypothetical_fraction = 0.0;
};

/// One row per pair of feature-values from different features. Fractions are
/// relative to the whole (actual or hypothetical) pool, so each column sums
/// to the number of feature pairs C(|F|, 2).
inline std::vector<IntersectionRow> pairwise_intersection_table(const Dataset &pool,
                                                                const Dataset &background,
                                                                const ParticipationModel &model) {
  if (!(pool.schema() == background.schema()))
    throw Error(ErrorKind::SchemaMismatch, "pool and background use different schemas");
  const auto &schema = pool.schema();
  const std::size_t P = schema.num_pairs();
  std::vector<double> actual(P * P, 0.0), hypo(P * P, 0.0);
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t f = 0; f < schema.num_features(); ++f)
      for (std::size_t g = f + 1; g < schema.num_features(); ++g)
        actual[pool.pair_of(i, f) * P + pool.pair_of(i, g)] += 1.0;
  const auto q = predict_q(model, background);
  double hypo_total = 0.0;
  for (std::size_t i = 0; i < background.size(); ++i) {
    const double m = background.agent(i).weight * q[i];
    hypo_total += m;
    for (std::size_t f = 0; f < schema.num_features(); ++f)
      for (std::size_t g = f + 1; g < schema.num_features(); ++g)
        hypo[background.pair_of(i, f) * P + background.pair_of(i, g)] += m;
  }
  const double pn = static_cast<double>(pool.size());
  std::vector<IntersectionRow> rows;
  for (std::size_t f = 0; f < schema.num_features(); ++f)
    for (std::size_t g = f + 1; g < schema.num_features(); ++g)
      for (std::size_t v = 0; v < schema.feature(f).values.size(); ++v)
        for (std::size_t w = 0; w < schema.feature(g).values.size(); ++w) {
          const std::size_t a = schema.pair_index(f, v), b = schema.pair_index(g, w);
          rows.push_back({a, b, pn > 0 ? actual[a * P + b] / pn : 0.0,
                          hypo_total > 0 ? hypo[a * P + b] / hypo_total : 0.0});
        }
  return rows;
}

struct HistogramBin {
  double lo = 0.0, hi = 0.0;
  /// Pool members with q̂ in [lo, hi); nullopt when suppressed.
  std::optional<double> pool_count;
  /// Σ w·q̂ over background records in the bin; nullopt when the bin holds
  /// fewer than the floor of background individuals.
  std::optional<double> hypothetical_count;
};

/// Histogram of predicted q on `edges` (increasing; the last bin is closed).
/// Bins backed by fewer than `min_individuals` people are suppressed.
inline std::vector<HistogramBin> q_histogram(const Dataset &pool, const Dataset &background,
                                             const ParticipationModel &model,
                                             std::span<const double> edges,
                                             std::size_t min_individuals = 7) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
    throw Error(ErrorKind::InvalidArgument, "histogram edges must be increasing");
  const std::size_t B = edges.size() - 1;
  auto bin_of = [&](double x) -> std::optional<std::size_t> {
    if (x < edges.front() || x > edges.back())
      return std::nullopt;
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    std::size_t b = static_cast<std::size_t>(it - edges.begin());
    return std::min(b == 0 ? 0 : b - 1, B - 1);
  };
  std::vector<std::size_t> pool_n(B, 0), bg_n(B, 0);
  std::vector<double> hypo(B, 0.0);
  const auto qp = predict_q(model, pool);
  for (double x : qp)
    if (auto b = bin_of(x))
      ++pool_n[*b];
  const auto qb = predict_q(model, background);
  for (std::size_t i = 0; i < qb.size(); ++i)
    if (auto b = bin_of(qb[i])) {
      ++bg_n[*b];
      hypo[*b] += background.agent(i).weight * qb[i];
    }
  std::vector<HistogramBin> out;
  for (std::size_t b = 0; b < B; ++b) {
    HistogramBin h{edges[b], edges[b + 1], std::nullopt, std::nullopt};
    if (pool_n[b] >= min_individuals)
      h.pool_count = static_cast<double>(pool_n[b]);
    if (bg_n[b] >= min_individuals)
      h.hypothetical_count = hypo[b];
    out.push_back(h);
  }
  return out;
}

} // namespace sortition
