#pragma once
// Synthetic populations and Monte-Carlo replay of invitation, self-selection
// and panel selection. Everything works at archetype granularity: an
// archetype is one background record duplicated `count` times, so large
// populations are never materialized.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sortition/baseline.hpp"
#include "sortition/error.hpp"
#include "sortition/learning.hpp"
#include "sortition/marginals.hpp"
#include "sortition/numerics/random.hpp"
#include "sortition/schema.hpp"

namespace sortition {

/// Largest-remainder apportionment of `total` seats proportional to weights;
/// ties in the remainder go to the lower index.
inline std::vector<std::uint64_t> hamilton_apportion(std::span<const double> weights,
                                                     std::uint64_t total) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw Error(ErrorKind::InvalidArgument, "apportionment weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0))
    throw Error(ErrorKind::InvalidArgument, "apportionment weights are all zero");
  const double td = static_cast<double>(total);
  std::vector<std::uint64_t> counts(weights.size());
  std::vector<double> remainder(weights.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = td * (weights[i] / sum);
    const double fl = std::floor(quota);
    counts[i] = static_cast<std::uint64_t>(fl);
    remainder[i] = quota - fl;
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  // Round-off can leave Σfloor one off in either direction.
  for (std::size_t j = 0; assigned < total; j = (j + 1) % order.size()) {
    ++counts[order[j]];
    ++assigned;
  }
  for (std::size_t j = order.size(); assigned > total;) {
    j = j == 0 ? order.size() - 1 : j - 1;
    if (counts[order[j]] > 0) {
      --counts[order[j]];
      --assigned;
    }
  }
  return counts;
}

struct Archetype {
  Agent agent;
  std::uint64_t count = 0;
  double q = 0.0;
};

struct SyntheticPopulation {
  FeatureSchema schema;
  std::vector<Archetype> archetypes;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;

  PopulationStats stats() const {
    PopulationStats s{n, std::vector<double>(schema.num_pairs(), 0.0)};
    for (const auto &a : archetypes)
      for (std::size_t f = 0; f < schema.num_features(); ++f)
        s.counts[schema.pair_index(f, a.agent.values[f])] += static_cast<double>(a.count);
    return s;
  }

  /// Smallest q among archetypes that actually occur.
  double min_q() const {
    double m = 1.0;
    for (const auto &a : archetypes)
      if (a.count > 0)
        m = std::min(m, a.q);
    return m;
  }
};

inline SyntheticPopulation make_population(FeatureSchema schema, std::vector<Archetype> archetypes,
                                           std::uint64_t seed = 0) {
  SyntheticPopulation pop{std::move(schema), std::move(archetypes), 0, seed};
  for (const auto &a : pop.archetypes) {
    if (a.agent.values.size() != pop.schema.num_features())
      throw Error(ErrorKind::SchemaMismatch, "archetype '" + a.agent.id + "' does not fit");
    if (!(a.q >= 0.0 && a.q <= 1.0))
      throw Error(ErrorKind::InvalidArgument, "archetype q outside [0, 1]");
    pop.n += a.count;
  }
  return pop;
}

/// Duplicates background records in proportion to their weights (Hamilton
/// apportionment to n) and attaches the model's predicted q as ground truth.
/// The construction is deterministic; `seed` is carried along as provenance
/// for the simulations that use the population.
inline SyntheticPopulation synthesize_population(const Dataset &background,
                                                 const ParticipationModel &model, std::uint64_t n,
                                                 std::uint64_t seed) {
  if (background.empty())
    throw Error(ErrorKind::EmptyDataset, "background is empty");
  if (n < background.size())
    throw Error(ErrorKind::InvalidArgument, "population smaller than the background sample");
  std::vector<double> w;
  for (const auto &a : background.agents())
    w.push_back(a.weight);
  const auto counts = hamilton_apportion(w, n);
  std::vector<Archetype> arch;
  for (std::size_t i = 0; i < background.size(); ++i)
    arch.push_back({background.agent(i), counts[i], predict_q(model, background.agent(i))});
  return make_population(background.schema(), std::move(arch), seed);
}

/// Pool members per archetype: r recipients drawn without replacement
/// (sequential hypergeometric), each joining with probability q.
inline std::vector<std::uint64_t> simulate_pool_counts(const SyntheticPopulation &pop,
                                                       std::uint64_t r,
                                                       numerics::RandomStream &rng) {
  if (r > pop.n)
    throw Error(ErrorKind::InvalidArgument, "more letters than people");
  std::vector<std::uint64_t> joined(pop.archetypes.size(), 0);
  std::uint64_t left = pop.n, draws = r;
  for (std::size_t j = 0; j < pop.archetypes.size() && draws > 0; ++j) {
    const auto &a = pop.archetypes[j];
    const std::uint64_t got = rng.hypergeometric(left, a.count, draws);
    left -= a.count;
    draws -= got;
    joined[j] = rng.binomial(got, a.q);
  }
  return joined;
}

/// Materializes a pool; member ids are "<archetype id>#<copy>".
inline Dataset pool_dataset(const SyntheticPopulation &pop, std::span<const std::uint64_t> counts,
                            std::vector<std::size_t> *archetype_of = nullptr) {
  std::vector<Agent> agents;
  if (archetype_of)
    archetype_of->clear();
  for (std::size_t j = 0; j < counts.size(); ++j)
    for (std::uint64_t c = 0; c < counts[j]; ++c) {
      Agent a = pop.archetypes[j].agent;
      a.id += "#" + std::to_string(c);
      a.weight = 1.0;
      agents.push_back(std::move(a));
      if (archetype_of)
        archetype_of->push_back(j);
    }
  return Dataset(pop.schema, std::move(agents), DatasetKind::pool);
}

inline Dataset simulate_pool(const SyntheticPopulation &pop, std::uint64_t r,
                             numerics::RandomStream &rng) {
  return pool_dataset(pop, simulate_pool_counts(pop, r, rng));
}

enum class Policy { strict, relaxed };
enum class Algorithm { ours, greedy, uniform };

inline const char *to_string(Policy p) { return p == Policy::strict ? "strict" : "relaxed"; }
inline const char *to_string(Algorithm a) {
  switch (a) {
  case Algorithm::ours: return "ours";
  case Algorithm::greedy: return "greedy";
  case Algorithm::uniform: return "uniform";
  }
  return "?";
}

/// Outcome of applying a policy to one pool's marginals.
struct PolicyVerdict {
  GoodPoolVerdict conditions;
  bool accepted = false;
  /// Condition (1) failed and the relaxed policy capped the marginals.
  bool capped = false;
};

/// Pool-level marginals and verdict computed per archetype: `counts[j]`
/// pool members share q_j and hence π_j. Matches check_good_pool on the
/// materialized pool. Under the relaxed policy condition (3) is ignored and
/// a condition (1) failure is repaired by capping, after which condition (2)
/// is checked on the capped marginals.
inline PolicyVerdict archetype_marginals(const SyntheticPopulation &pop,
                                         std::span<const std::uint64_t> counts,
                                         const Instance &inst, Policy policy,
                                         std::vector<double> &pi) {
  const std::size_t A = pop.archetypes.size();
  PolicyVerdict out;
  auto &v = out.conditions;
  pi.assign(A, 0.0);
  double sum_a = 0.0, members = 0.0;
  for (std::size_t j = 0; j < A; ++j)
    if (counts[j] > 0) {
      sum_a += static_cast<double>(counts[j]) / pop.archetypes[j].q;
      members += static_cast<double>(counts[j]);
    }
  if (members == 0.0)
    return out;
  const double kd = static_cast<double>(inst.k);
  for (std::size_t j = 0; j < A; ++j)
    if (counts[j] > 0) {
      pi[j] = kd * ((1.0 / pop.archetypes[j].q) / sum_a);
      v.max_pi = std::max(v.max_pi, pi[j]);
    }
  v.sum_a = sum_a;
  v.cond1_ok = v.max_pi <= 1.0 + 1e-12;
  const bool degenerate = !(inst.alpha > 1.0);
  v.cond2_allowed = degenerate ? 0.0 : inst.slack();
  v.cond3_bound = degenerate ? std::numeric_limits<double>::infinity()
                             : static_cast<double>(inst.r) / (1.0 - v.cond2_allowed);
  v.cond3_ok = !degenerate && sum_a <= v.cond3_bound * (1.0 + 1e-12);

  auto check_cond2 = [&] {
    std::vector<double> sums(pop.schema.num_pairs(), 0.0);
    for (std::size_t j = 0; j < A; ++j)
      if (counts[j] > 0)
        for (std::size_t f = 0; f < pop.schema.num_features(); ++f)
          sums[pop.schema.pair_index(f, pop.archetypes[j].agent.values[f])] +=
              static_cast<double>(counts[j]) * pi[j];
    bool within = true;
    v.cond2_worst_pair.reset();
    for (std::size_t p = 0; p < sums.size(); ++p) {
      const double target = kd * inst.stats.share(p);
      const double dev = std::abs(sums[p] - target);
      const double rel = target > 0.0 ? dev / target
                                      : (dev > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      if (!v.cond2_worst_pair || rel > v.cond2_worst_relative) {
        v.cond2_worst_pair = p;
        v.cond2_worst_relative = rel;
      }
      if (dev > v.cond2_allowed * target + 1e-9 * kd)
        within = false;
    }
    v.cond2_ok = !degenerate && within;
  };

  if (!v.cond1_ok && policy == Policy::relaxed) {
    std::vector<double> mult(A);
    for (std::size_t j = 0; j < A; ++j)
      mult[j] = static_cast<double>(counts[j]);
    try {
      pi = rescale_and_cap_weighted(pi, mult, inst.k);
      out.capped = true;
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::InfeasibleCap)
        throw;
      check_cond2();
      return out;
    }
  }
  check_cond2();
  out.accepted = v.cond2_ok && (v.cond1_ok || out.capped) &&
                 (policy == Policy::relaxed || v.cond3_ok);
  return out;
}

struct EndToEndOptions {
  std::uint64_t r = 0;
  std::uint64_t k = 0;
  std::size_t pools = 10000;
  Policy policy = Policy::strict;
  Algorithm algorithm = Algorithm::ours;
  std::uint64_t seed = 0;
  /// Defaults to the smallest q in the population.
  std::optional<double> q_star;
  double exponent = kDefaultExponent;
  std::size_t greedy_max_restarts = 100;
  std::size_t greedy_trials_per_pool = 10;
};

struct ArchetypeEstimate {
  std::string id;
  double q = 0.0;
  std::uint64_t count = 0;
  /// Mean over pools of P[a given copy lands on the panel | pool].
  double estimate = 0.0;
  double std_error = 0.0;
};

struct EndToEndReport {
  Algorithm algorithm = Algorithm::ours;
  Policy policy = Policy::strict;
  std::uint64_t n = 0, r = 0, k = 0;
  std::size_t pools = 0;
  double alpha = 0.0;
  std::vector<ArchetypeEstimate> rows;
  /// Pools that produced a panel under the algorithm and policy.
  std::size_t good_pools = 0;
  /// Per-condition failures (a pool can fail several).
  std::size_t cond1_failures = 0, cond2_failures = 0, cond3_failures = 0;
  std::size_t capped_pools = 0;
  /// Pools with fewer than k members.
  std::size_t small_pools = 0;
  /// Greedy trial failures.
  std::size_t greedy_quota_infeasible = 0, greedy_restart_limit = 0;

  double mean_pool_size = 0.0;
};

inline EndToEndReport estimate_end_to_end(const SyntheticPopulation &pop,
                                          const EndToEndOptions &opt) {
  if (opt.k == 0 || opt.r < opt.k)
    throw Error(ErrorKind::InvalidArgument, "need 1 <= k <= r");
  if (opt.pools == 0)
    throw Error(ErrorKind::InvalidArgument, "need at least one pool");
  for (const auto &a : pop.archetypes)
    if (a.count > 0 && !(a.q > 0.0) && opt.algorithm == Algorithm::ours)
      throw Error(ErrorKind::InvalidArgument, "archetype '" + a.agent.id + "' has q = 0");
  const auto stats = pop.stats();
  const double q_star = opt.q_star.value_or(pop.min_q());
  const auto inst = make_instance(stats, opt.r, opt.k, q_star, pop.schema.num_features(),
                                  opt.exponent);
  GreedyConfig gcfg;
  if (opt.algorithm == Algorithm::greedy) {
    gcfg.quotas = proportional_quotas(stats, opt.k);
    gcfg.k = opt.k;
    gcfg.max_restarts = opt.greedy_max_restarts;
    gcfg.trials_per_pool = opt.greedy_trials_per_pool;
  }

  const std::size_t A = pop.archetypes.size();
  EndToEndReport rep;
  rep.algorithm = opt.algorithm;
  rep.policy = opt.policy;
  rep.n = pop.n;
  rep.r = opt.r;
  rep.k = opt.k;
  rep.pools = opt.pools;
  rep.alpha = inst.alpha;
  std::vector<double> sum(A, 0.0), sumsq(A, 0.0), contrib(A), pi;
  std::vector<std::size_t> archetype_of;
  double pool_size_total = 0.0;
  const double kd = static_cast<double>(opt.k);

  for (std::size_t t = 0; t < opt.pools; ++t) {
    auto rng = numerics::split_stream(opt.seed, t);
    const auto counts = simulate_pool_counts(pop, opt.r, rng);
    const std::uint64_t size = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    pool_size_total += static_cast<double>(size);
    std::fill(contrib.begin(), contrib.end(), 0.0);
    if (size < opt.k)
      ++rep.small_pools;

    switch (opt.algorithm) {
    case Algorithm::ours: {
      if (size == 0)
        break;
      const auto verdict = archetype_marginals(pop, counts, inst, opt.policy, pi);
      rep.cond1_failures += !verdict.conditions.cond1_ok;
      rep.cond2_failures += !verdict.conditions.cond2_ok;
      rep.cond3_failures += !verdict.conditions.cond3_ok;
      rep.capped_pools += verdict.capped;
      if (!verdict.accepted)
        break;
      ++rep.good_pools;
      for (std::size_t j = 0; j < A; ++j)
        if (counts[j] > 0)
          contrib[j] = static_cast<double>(counts[j]) * pi[j];
      break;
    }
    case Algorithm::uniform: {
      if (size < opt.k)
        break;
      ++rep.good_pools;
      const double each = kd / static_cast<double>(size);
      for (std::size_t j = 0; j < A; ++j)
        contrib[j] = static_cast<double>(counts[j]) * each;
      break;
    }
    case Algorithm::greedy: {
      const auto pool = pool_dataset(pop, counts, &archetype_of);
      const auto freq = estimate_selection_probs(pool, gcfg, rng);
      rep.greedy_quota_infeasible += freq.quota_infeasible;
      rep.greedy_restart_limit += freq.restart_limit;
      if (freq.successes > 0)
        ++rep.good_pools;
      for (std::size_t i = 0; i < pool.size(); ++i)
        contrib[archetype_of[i]] += freq.frequency[i];
      break;
    }
    }
    for (std::size_t j = 0; j < A; ++j) {
      if (pop.archetypes[j].count == 0)
        continue;
      const double x = contrib[j] / static_cast<double>(pop.archetypes[j].count);
      sum[j] += x;
      sumsq[j] += x * x;
    }
  }

  const double T = static_cast<double>(opt.pools);
  rep.mean_pool_size = pool_size_total / T;
  for (std::size_t j = 0; j < A; ++j) {
    const auto &a = pop.archetypes[j];
    ArchetypeEstimate e{a.agent.id, a.q, a.count, 0.0, 0.0};
    if (a.count > 0) {
      e.estimate = sum[j] / T;
      const double var = T > 1 ? std::max(0.0, (sumsq[j] - T * e.estimate * e.estimate) / (T - 1))
                               : 0.0;
      e.std_error = std::sqrt(var / T);
    }
    rep.rows.push_back(std::move(e));
  }
  return rep;
}

} // namespace sortition
