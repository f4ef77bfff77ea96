#pragma once
// Selection marginals, good-pool checks and per-pair seat quotas.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sortition/error.hpp"
#include "sortition/schema.hpp"

namespace sortition {

inline constexpr double kDefaultExponent = 0.49;

inline double compute_alpha(double q_star, std::uint64_t r, std::uint64_t k) {
  return q_star * static_cast<double>(r) / static_cast<double>(k);
}

struct Instance {
  PopulationStats stats;
  std::uint64_t r = 0;
  std::uint64_t k = 0;
  double q_star = 1.0;
  double alpha = 0.0;
  std::size_t num_features = 0;
  double exponent = kDefaultExponent;

  double a_star() const { return 1.0 / q_star; }
  /// α^{-exponent}, the relative slack used by the good-pool conditions.
  double slack() const { return std::pow(alpha, -exponent); }
};

inline Instance make_instance(PopulationStats stats, std::uint64_t r, std::uint64_t k,
                              double q_star, std::size_t num_features,
                              double exponent = kDefaultExponent) {
  if (k == 0 || r == 0)
    throw Error(ErrorKind::InvalidArgument, "r and k must be positive");
  if (k > r)
    throw Error(ErrorKind::InvalidArgument, "panel size k exceeds letters r");
  if (!(q_star > 0.0 && q_star <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "q* must lie in (0, 1]");
  if (!(exponent > 0.0))
    throw Error(ErrorKind::InvalidArgument, "exponent must be positive");
  if (stats.n == 0)
    throw Error(ErrorKind::InvalidArgument, "population size must be positive");
  Instance inst;
  inst.stats = std::move(stats);
  inst.r = r;
  inst.k = k;
  inst.q_star = q_star;
  inst.alpha = compute_alpha(q_star, r, k);
  inst.num_features = num_features;
  inst.exponent = exponent;
  return inst;
}

inline void validate_q(std::span<const double> q) {
  for (double x : q)
    if (!(x > 0.0 && x <= 1.0))
      throw Error(ErrorKind::InvalidArgument,
                  "participation probability outside (0, 1]: " + std::to_string(x));
}

/// π_i = k·a_i / Σ_j a_j with a_i = 1/q_i.
inline std::vector<double> compute_marginals(std::span<const double> q, std::uint64_t k) {
  if (q.empty())
    throw Error(ErrorKind::EmptyPool, "pool is empty");
  validate_q(q);
  // Factor out the largest a so uniform q gives exactly k/|P| and a
  // common rescaling of q cancels.
  const double q_min = *std::min_element(q.begin(), q.end());
  std::vector<double> pi(q.size());
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    total += pi[i] = q_min / q[i];
  const double kd = static_cast<double>(k);
  for (double &p : pi)
    p = kd * (p / total);
  return pi;
}

struct GoodPoolVerdict {
  bool cond1_ok = false;
  bool cond2_ok = false;
  bool cond3_ok = false;
  /// Largest marginal; cond1 needs it at most 1.
  double max_pi = 0.0;
  /// Pair with the largest |Σπ − k·n_{f,v}/n| / (k·n_{f,v}/n), and that value.
  std::optional<std::size_t> cond2_worst_pair;
  double cond2_worst_relative = 0.0;
  /// Allowed relative deviation α^{-exponent} (infinite-free; meaningless if α ≤ 1).
  double cond2_allowed = 0.0;
  double sum_a = 0.0;
  /// r / (1 − α^{-exponent}); +inf when α ≤ 1.
  double cond3_bound = 0.0;

  bool good() const { return cond1_ok && cond2_ok && cond3_ok; }
};

/// Sum of marginals per feature-value pair.
inline std::vector<double> pair_sums(const Dataset &pool, std::span<const double> x) {
  const auto &schema = pool.schema();
  std::vector<double> sums(schema.num_pairs(), 0.0);
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t f = 0; f < schema.num_features(); ++f)
      sums[pool.pair_of(i, f)] += x[i];
  return sums;
}

inline GoodPoolVerdict check_good_pool(const Dataset &pool, std::span<const double> q,
                                       std::span<const double> pi,
                                       const Instance &inst) {
  if (q.size() != pool.size() || pi.size() != pool.size())
    throw Error(ErrorKind::InvalidArgument, "marginal vector size does not match pool");
  GoodPoolVerdict v;
  v.max_pi = pi.empty() ? 0.0 : *std::max_element(pi.begin(), pi.end());
  v.cond1_ok = v.max_pi <= 1.0 + 1e-12;

  for (double x : q)
    v.sum_a += 1.0 / x;
  const double kd = static_cast<double>(inst.k);
  const bool degenerate = !(inst.alpha > 1.0);
  v.cond2_allowed = degenerate ? 0.0 : inst.slack();
  v.cond3_bound = degenerate ? std::numeric_limits<double>::infinity()
                             : static_cast<double>(inst.r) / (1.0 - v.cond2_allowed);

  const auto sums = pair_sums(pool, pi);
  bool within = true;
  for (std::size_t p = 0; p < sums.size(); ++p) {
    const double target = kd * inst.stats.share(p);
    const double dev = std::abs(sums[p] - target);
    double rel;
    if (target > 0.0)
      rel = dev / target;
    else
      rel = dev > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    if (!v.cond2_worst_pair || rel > v.cond2_worst_relative) {
      v.cond2_worst_pair = p;
      v.cond2_worst_relative = rel;
    }
    // Tiny absolute slack absorbs round-off in Σπ.
    if (dev > v.cond2_allowed * target + 1e-9 * kd)
      within = false;
  }
  v.cond2_ok = !degenerate && within;
  v.cond3_ok = !degenerate && v.sum_a <= v.cond3_bound * (1.0 + 1e-12);
  return v;
}

struct MarginalAssignment {
  std::vector<std::string> pool_ids;
  std::vector<double> q;
  std::vector<double> a;
  std::vector<double> pi;
  GoodPoolVerdict good;
};

inline MarginalAssignment assign_marginals(const Dataset &pool, std::span<const double> q,
                                           const Instance &inst) {
  if (pool.empty())
    throw Error(ErrorKind::EmptyPool, "pool is empty");
  if (q.size() != pool.size())
    throw Error(ErrorKind::InvalidArgument, "q vector size does not match pool");
  MarginalAssignment m;
  m.q.assign(q.begin(), q.end());
  m.pi = compute_marginals(q, inst.k);
  m.a.reserve(q.size());
  for (double x : q)
    m.a.push_back(1.0 / x);
  for (const auto &agent : pool.agents())
    m.pool_ids.push_back(agent.id);
  m.good = check_good_pool(pool, q, m.pi, inst);
  return m;
}

struct QuotaSet {
  std::vector<std::int64_t> lower;
  std::vector<std::int64_t> upper;

  std::size_t size() const { return lower.size(); }
  bool satisfied_by(std::span<const std::int64_t> seats) const {
    for (std::size_t p = 0; p < lower.size(); ++p)
      if (seats[p] < lower[p] || seats[p] > upper[p])
        return false;
    return true;
  }
};

/// Integer quotas guaranteed for panels drawn from a good pool. Real bounds
/// (1 ∓ α^{-e})·k·n_{f,v}/n ∓ |F| are clamped to [0, k]; since seat counts
/// are integers, the lower bound is rounded up and the upper bound down.
inline QuotaSet compute_quotas(const Instance &inst) {
  const std::size_t pairs = inst.stats.counts.size();
  const auto k = static_cast<std::int64_t>(inst.k);
  QuotaSet qs{std::vector<std::int64_t>(pairs, 0), std::vector<std::int64_t>(pairs, k)};
  if (!(inst.alpha > 1.0))
    return qs;
  const double s = inst.slack();
  const double kd = static_cast<double>(inst.k);
  const double F = static_cast<double>(inst.num_features);
  constexpr double snap = 1e-9;
  for (std::size_t p = 0; p < pairs; ++p) {
    const double prop = kd * inst.stats.share(p);
    const double lo = std::max(0.0, (1.0 - s) * prop - F);
    const double hi = std::min(kd, (1.0 + s) * prop + F);
    qs.lower[p] = static_cast<std::int64_t>(std::ceil(lo - snap));
    qs.upper[p] = static_cast<std::int64_t>(std::floor(hi + snap));
    qs.lower[p] = std::clamp<std::int64_t>(qs.lower[p], 0, k);
    qs.upper[p] = std::clamp<std::int64_t>(qs.upper[p], qs.lower[p], k);
  }
  return qs;
}

/// Caps entries at 1 and rescales the rest so Σ multiplicity·value stays k.
/// Entry i stands for `multiplicity[i]` identical agents.
inline std::vector<double> rescale_and_cap_weighted(std::span<const double> pi,
                                                    std::span<const double> multiplicity,
                                                    std::uint64_t k) {
  std::vector<double> out(pi.begin(), pi.end());
  const double kd = static_cast<double>(k);
  double agents = 0.0;
  for (double m : multiplicity)
    agents += m;
  if (agents < kd)
    throw Error(ErrorKind::InfeasibleCap, "fewer agents than seats");
  std::vector<bool> capped(out.size(), false);
  double num_capped = 0.0;
  for (;;) {
    bool over = false;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (!capped[i] && out[i] > 1.0) {
        capped[i] = true;
        out[i] = 1.0;
        num_capped += multiplicity[i];
        over = true;
      }
    if (!over)
      break;
    if (num_capped > kd)
      throw Error(ErrorKind::InfeasibleCap, "more than k entries need capping");
    double free_mass = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (!capped[i])
        free_mass += multiplicity[i] * out[i];
    const double want = kd - num_capped;
    if (want <= 0.0) {
      for (std::size_t i = 0; i < out.size(); ++i)
        if (!capped[i])
          out[i] = 0.0;
      break;
    }
    if (!(free_mass > 0.0))
      throw Error(ErrorKind::InfeasibleCap, "no uncapped mass left to rescale");
    const double scale = want / free_mass;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (!capped[i])
        out[i] *= scale;
  }
  return out;
}

/// Caps entries at 1 and rescales the rest so the total stays k.
inline std::vector<double> rescale_and_cap(std::span<const double> pi, std::uint64_t k) {
  const std::vector<double> ones(pi.size(), 1.0);
  return rescale_and_cap_weighted(pi, ones, k);
}

} // namespace sortition
