#pragma once
// Restart-based greedy quota filling, the comparison baseline. This is a
// reimplementation of the commonly used practitioner procedure, not a
// byte-for-byte replica of any particular tool:
//
//   while seats remain: take the pair with the largest ratio of unmet lower
//   quota to eligible pool members holding it; pick one of those members
//   uniformly (or any eligible member once no lower quota is unmet). An
//   eligible member is one whose addition breaks no upper quota. Dead ends
//   restart from scratch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sortition/error.hpp"
#include "sortition/marginals.hpp"
#include "sortition/numerics/random.hpp"
#include "sortition/rounding/panel.hpp"
#include "sortition/schema.hpp"

namespace sortition {

struct GreedyConfig {
  QuotaSet quotas;
  std::uint64_t k = 0;
  std::size_t max_restarts = 100;
  std::size_t trials_per_pool = 10;
};

/// Floor and ceiling of each pair's proportional share k·n_{f,v}/n.
inline QuotaSet proportional_quotas(const PopulationStats &stats, std::uint64_t k) {
  QuotaSet qs;
  const double kd = static_cast<double>(k);
  for (std::size_t p = 0; p < stats.counts.size(); ++p) {
    const double share = kd * stats.share(p);
    qs.lower.push_back(static_cast<std::int64_t>(std::floor(share + 1e-9)));
    qs.upper.push_back(static_cast<std::int64_t>(std::ceil(share - 1e-9)));
  }
  return qs;
}

enum class GreedyFailure { none, quota_infeasible, restart_limit };

struct GreedyOutcome {
  std::optional<Panel> panel;
  GreedyFailure failure = GreedyFailure::none;
  std::size_t attempts = 0;
  std::string message;
};

namespace detail {

inline void validate_greedy(const Dataset &pool, const GreedyConfig &cfg) {
  if (cfg.k == 0)
    throw Error(ErrorKind::InvalidArgument, "panel size must be positive");
  if (cfg.max_restarts < 1 || cfg.trials_per_pool < 1)
    throw Error(ErrorKind::InvalidArgument, "restarts and trials must be at least 1");
  if (cfg.quotas.size() != pool.schema().num_pairs())
    throw Error(ErrorKind::InvalidArgument, "quota set does not match the schema");
}

// Up-front infeasibility: a lower quota above the pool's supply, or too few
// pool members overall.
inline std::optional<std::string> quota_shortfall(const Dataset &pool, const GreedyConfig &cfg) {
  if (pool.size() < cfg.k)
    return "pool has " + std::to_string(pool.size()) + " members for " +
           std::to_string(cfg.k) + " seats";
  std::vector<std::int64_t> supply(pool.schema().num_pairs(), 0);
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t f = 0; f < pool.schema().num_features(); ++f)
      ++supply[pool.pair_of(i, f)];
  for (std::size_t p = 0; p < supply.size(); ++p)
    if (cfg.quotas.lower[p] > supply[p])
      return "lower quota " + std::to_string(cfg.quotas.lower[p]) + " for " +
             pool.schema().pair_label(p) + " exceeds its " + std::to_string(supply[p]) +
             " pool members";
  return std::nullopt;
}

inline std::optional<std::vector<std::size_t>>
greedy_attempt(const Dataset &pool, const GreedyConfig &cfg, numerics::RandomStream &rng) {
  const auto &schema = pool.schema();
  const std::size_t F = schema.num_features(), pairs = schema.num_pairs();
  const auto &lower = cfg.quotas.lower, &upper = cfg.quotas.upper;
  std::vector<std::int64_t> seats(pairs, 0);
  std::vector<bool> taken(pool.size(), false);
  std::vector<std::size_t> chosen, eligible, holders;
  std::vector<std::int64_t> available(pairs);
  while (chosen.size() < cfg.k) {
    eligible.clear();
    std::fill(available.begin(), available.end(), 0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i])
        continue;
      bool ok = true;
      for (std::size_t f = 0; f < F && ok; ++f)
        ok = seats[pool.pair_of(i, f)] < upper[pool.pair_of(i, f)];
      if (!ok)
        continue;
      eligible.push_back(i);
      for (std::size_t f = 0; f < F; ++f)
        ++available[pool.pair_of(i, f)];
    }
    if (eligible.empty())
      return std::nullopt;
    std::optional<std::size_t> target;
    double best = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::int64_t deficit = lower[p] - seats[p];
      if (deficit <= 0)
        continue;
      if (available[p] == 0)
        return std::nullopt;
      const double ratio = static_cast<double>(deficit) / static_cast<double>(available[p]);
      if (!target || ratio > best) {
        target = p;
        best = ratio;
      }
    }
    std::size_t pick;
    if (target) {
      holders.clear();
      const std::size_t f = schema.pair_feature(*target);
      for (std::size_t i : eligible)
        if (pool.pair_of(i, f) == *target)
          holders.push_back(i);
      pick = holders[rng.uniform_index(holders.size())];
    } else {
      pick = eligible[rng.uniform_index(eligible.size())];
    }
    taken[pick] = true;
    chosen.push_back(pick);
    for (std::size_t f = 0; f < F; ++f)
      ++seats[pool.pair_of(pick, f)];
  }
  for (std::size_t p = 0; p < pairs; ++p)
    if (seats[p] < lower[p])
      return std::nullopt;
  return chosen;
}

} // namespace detail

/// Non-throwing greedy selection.
inline GreedyOutcome try_greedy_select(const Dataset &pool, const GreedyConfig &cfg,
                                       numerics::RandomStream &rng) {
  detail::validate_greedy(pool, cfg);
  GreedyOutcome out;
  if (auto why = detail::quota_shortfall(pool, cfg)) {
    out.failure = GreedyFailure::quota_infeasible;
    out.message = *why;
    return out;
  }
  for (std::size_t attempt = 0; attempt < cfg.max_restarts; ++attempt) {
    ++out.attempts;
    if (auto members = detail::greedy_attempt(pool, cfg, rng)) {
      out.panel = make_panel(pool, std::move(*members));
      return out;
    }
  }
  out.failure = GreedyFailure::restart_limit;
  out.message = "no quota-feasible panel after " + std::to_string(cfg.max_restarts) + " attempts";
  return out;
}

inline Panel greedy_select(const Dataset &pool, const GreedyConfig &cfg,
                           numerics::RandomStream &rng) {
  auto out = try_greedy_select(pool, cfg, rng);
  switch (out.failure) {
  case GreedyFailure::none:
    return std::move(*out.panel);
  case GreedyFailure::quota_infeasible:
    throw Error(ErrorKind::QuotaInfeasible, out.message);
  case GreedyFailure::restart_limit:
    break;
  }
  throw Error(ErrorKind::RestartLimit, out.message);
}

struct SelectionFrequencies {
  /// Selections per agent divided by trials; failed trials count as no panel.
  std::vector<double> frequency;
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t quota_infeasible = 0;
  std::size_t restart_limit = 0;
};

inline SelectionFrequencies estimate_selection_probs(const Dataset &pool, const GreedyConfig &cfg,
                                                     numerics::RandomStream &rng) {
  detail::validate_greedy(pool, cfg);
  SelectionFrequencies out;
  out.frequency.assign(pool.size(), 0.0);
  out.trials = cfg.trials_per_pool;
  if (detail::quota_shortfall(pool, cfg)) {
    out.quota_infeasible = cfg.trials_per_pool;
    return out;
  }
  for (std::size_t t = 0; t < cfg.trials_per_pool; ++t) {
    auto res = try_greedy_select(pool, cfg, rng);
    if (!res.panel) {
      ++out.restart_limit;
      continue;
    }
    ++out.successes;
    for (std::size_t i : res.panel->members)
      out.frequency[i] += 1.0;
  }
  for (double &f : out.frequency)
    f /= static_cast<double>(cfg.trials_per_pool);
  return out;
}

} // namespace sortition
