#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sortition/marginals.hpp"
#include "support.hpp"

using namespace sortition;
using testing_support::make_schema;

namespace {

PopulationStats uniform_stats(const FeatureSchema &schema, std::uint64_t n) {
  PopulationStats s{n, std::vector<double>(schema.num_pairs())};
  for (std::size_t f = 0; f < schema.num_features(); ++f) {
    const auto vals = schema.feature(f).values.size();
    for (std::size_t v = 0; v < vals; ++v)
      s.counts[schema.pair_index(f, v)] = static_cast<double>(n) / static_cast<double>(vals);
  }
  return s;
}

} // namespace

TEST(Alpha, Examples) {
  EXPECT_NEAR(compute_alpha(0.0078, 60000, 110), 4.2545454545, 1e-9);
  EXPECT_DOUBLE_EQ(compute_alpha(10.0 / 100.0, 100, 10), 1.0);
  EXPECT_DOUBLE_EQ(compute_alpha(0.5, 100, 10), 5.0);
}

TEST(Instance, ValidatesAndStoresAlpha) {
  const auto schema = make_schema({2});
  const auto inst = make_instance(uniform_stats(schema, 1000), 600, 10, 0.3, 1);
  EXPECT_EQ(inst.alpha, compute_alpha(0.3, 600, 10));
  EXPECT_DOUBLE_EQ(inst.a_star(), 1.0 / 0.3);
  EXPECT_THROW(make_instance(uniform_stats(schema, 1000), 5, 10, 0.3, 1), Error);
  EXPECT_THROW(make_instance(uniform_stats(schema, 1000), 50, 10, 0.0, 1), Error);
  EXPECT_THROW(make_instance(uniform_stats(schema, 1000), 50, 10, 1.5, 1), Error);
}

TEST(Marginals, UniformCase) {
  const std::vector<double> q(10, 0.03);
  for (double p : compute_marginals(q, 2))
    EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(Marginals, DirectFormula) {
  const auto pi = compute_marginals(std::vector<double>{1.0, 1.0, 0.5}, 2);
  EXPECT_DOUBLE_EQ(pi[0], 0.5);
  EXPECT_DOUBLE_EQ(pi[1], 0.5);
  EXPECT_DOUBLE_EQ(pi[2], 1.0);
}

TEST(Marginals, Errors) {
  EXPECT_THROW(compute_marginals(std::vector<double>{}, 1), Error);
  try {
    compute_marginals(std::vector<double>{}, 1);
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyPool);
  }
  EXPECT_THROW(compute_marginals(std::vector<double>{0.0, 0.5}, 1), Error);
  EXPECT_THROW(compute_marginals(std::vector<double>{1.5, 0.5}, 1), Error);
}

TEST(Marginals, PropertiesOnRandomVectors) {
  auto rng = numerics::split_stream(31, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(300);
    const std::uint64_t k = 1 + rng.uniform_index(50);
    std::vector<double> q(n);
    for (auto &x : q)
      x = 1e-4 + rng.uniform() * (1 - 1e-4);
    const auto pi = compute_marginals(q, k);
    const double sum = std::accumulate(pi.begin(), pi.end(), 0.0);
    EXPECT_NEAR(sum, static_cast<double>(k), 1e-9 * static_cast<double>(k));
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GT(pi[i], 0.0);
      EXPECT_NEAR((1.0 / q[i]) * q[i], 1.0, 1e-12);
    }
    // Scale invariance.
    const double c = 0.01 + rng.uniform() * 0.99;
    auto qs = q;
    for (auto &x : qs)
      x *= c;
    const auto pis = compute_marginals(qs, k);
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(pis[i], pi[i], 1e-12 * std::max(1.0, pi[i]));
    // Monotonicity.
    for (std::size_t t = 0; t + 1 < std::min<std::size_t>(n, 20); ++t) {
      if (q[t] < q[t + 1]) {
        EXPECT_GT(pi[t], pi[t + 1]);
      } else if (q[t] > q[t + 1]) {
        EXPECT_LT(pi[t], pi[t + 1]);
      }
    }
  }
}

TEST(GoodPool, Cond1Violation) {
  const auto schema = make_schema({2});
  const Dataset pool(schema,
                     {{"a", {0}, 1, {}}, {"b", {1}, 1, {}}, {"c", {1}, 1, {}}},
                     DatasetKind::pool);
  const std::vector<double> q{0.1, 0.5, 0.5};
  const auto inst = make_instance(uniform_stats(schema, 1000), 100, 2, 0.1, 1);
  const auto pi = compute_marginals(q, 2); // (10/7)·... first entry 10/7 > 1
  ASSERT_GT(pi[0], 1.0);
  const auto v = check_good_pool(pool, q, pi, inst);
  EXPECT_FALSE(v.cond1_ok);
  EXPECT_FALSE(v.good());
  EXPECT_DOUBLE_EQ(v.max_pi, pi[0]);
}

TEST(GoodPool, ExactBoundaryOfCond1) {
  const auto schema = make_schema({3});
  const Dataset pool(schema,
                     {{"a", {0}, 1, {}}, {"b", {1}, 1, {}}, {"c", {2}, 1, {}}},
                     DatasetKind::pool);
  const std::vector<double> q(3, 0.2);
  const auto inst = make_instance(uniform_stats(schema, 3000), 200, 3, 0.2, 1);
  const auto pi = compute_marginals(q, 3);
  for (double p : pi)
    EXPECT_DOUBLE_EQ(p, 1.0);
  const auto v = check_good_pool(pool, q, pi, inst);
  EXPECT_TRUE(v.cond1_ok);
  // Each pair gets exactly one seat, its proportional share.
  EXPECT_TRUE(v.cond2_ok);
  EXPECT_NEAR(v.cond2_worst_relative, 0.0, 1e-12);
  // Σa = 15 is far below r / (1 − α^{-0.49}).
  EXPECT_TRUE(v.cond3_ok);
  EXPECT_TRUE(v.good());
}

TEST(GoodPool, Cond2DetectsSkewAndNamesWorstPair) {
  const auto schema = make_schema({2});
  std::vector<Agent> agents;
  for (int i = 0; i < 80; ++i)
    agents.push_back({std::to_string(i), {i < 60 ? 0u : 1u}, 1, {}});
  const Dataset pool(schema, agents, DatasetKind::pool);
  const std::vector<double> q(80, 0.05);
  const auto inst = make_instance(uniform_stats(schema, 100000), 2000, 10, 0.05, 1);
  const auto pi = compute_marginals(q, 10);
  const auto v = check_good_pool(pool, q, pi, inst);
  // α = 10, allowed relative deviation 10^-0.49 ≈ 0.32; realized 0.5.
  EXPECT_FALSE(v.cond2_ok);
  EXPECT_NEAR(v.cond2_worst_relative, 0.5, 1e-12);
  EXPECT_NEAR(v.cond2_allowed, std::pow(10.0, -0.49), 1e-12);
  ASSERT_TRUE(v.cond2_worst_pair);
}

TEST(GoodPool, Cond3UsesSumOfInverseProbabilities) {
  const auto schema = make_schema({2});
  std::vector<Agent> agents;
  for (int i = 0; i < 40; ++i)
    agents.push_back({std::to_string(i), {static_cast<std::size_t>(i % 2)}, 1, {}});
  const Dataset pool(schema, agents, DatasetKind::pool);
  const auto inst = make_instance(uniform_stats(schema, 100000), 200, 4, 0.5, 1);
  // α = 25; bound = 200 / (1 − 25^-0.49) ≈ 257.
  const double bound = 200.0 / (1.0 - std::pow(25.0, -0.49));
  std::vector<double> q(40, 40.0 / (bound - 1.0));
  auto v = check_good_pool(pool, q, compute_marginals(q, 4), inst);
  EXPECT_TRUE(v.cond3_ok);
  EXPECT_NEAR(v.cond3_bound, bound, 1e-9);
  q.assign(40, 40.0 / (bound + 1.0));
  v = check_good_pool(pool, q, compute_marginals(q, 4), inst);
  EXPECT_FALSE(v.cond3_ok);
}

TEST(GoodPool, AlphaAtMostOneFailsConditions2And3) {
  const auto schema = make_schema({2});
  const Dataset pool(schema, {{"a", {0}, 1, {}}, {"b", {1}, 1, {}}}, DatasetKind::pool);
  const std::vector<double> q(2, 0.5);
  const auto inst = make_instance(uniform_stats(schema, 100), 2, 1, 0.5, 1);
  ASSERT_LE(inst.alpha, 1.0);
  const auto v = check_good_pool(pool, q, compute_marginals(q, 1), inst);
  EXPECT_TRUE(v.cond1_ok);
  EXPECT_FALSE(v.cond2_ok);
  EXPECT_FALSE(v.cond3_ok);
}

TEST(GoodPool, IsPure) {
  auto rng = numerics::split_stream(4, 4);
  const auto schema = make_schema({3, 2});
  const auto pool = testing_support::random_dataset(schema, 50, rng);
  std::vector<double> q(50);
  for (auto &x : q)
    x = 0.02 + 0.1 * rng.uniform();
  const auto inst = make_instance(uniform_stats(schema, 100000), 3000, 8, 0.02, 2);
  const auto pi = compute_marginals(q, 8);
  const auto a = check_good_pool(pool, q, pi, inst);
  const auto b = check_good_pool(pool, q, pi, inst);
  EXPECT_EQ(a.cond1_ok, b.cond1_ok);
  EXPECT_EQ(a.cond2_ok, b.cond2_ok);
  EXPECT_EQ(a.cond3_ok, b.cond3_ok);
  EXPECT_EQ(a.cond2_worst_pair, b.cond2_worst_pair);
  EXPECT_EQ(a.cond2_worst_relative, b.cond2_worst_relative);
  EXPECT_EQ(a.sum_a, b.sum_a);
}

TEST(Quotas, LargeAlphaLimit) {
  const auto schema = make_schema({2, 2, 2, 2, 2, 2});
  auto inst = make_instance(uniform_stats(schema, 1000000), 1000, 110, 1.0, 6);
  inst.alpha = 1e12;
  const auto qs = compute_quotas(inst);
  for (std::size_t p = 0; p < schema.num_pairs(); ++p) {
    EXPECT_EQ(qs.lower[p], 49);
    EXPECT_EQ(qs.upper[p], 61);
  }
}

TEST(Quotas, PaperScaleMultiplier) {
  EXPECT_NEAR(1.0 - std::pow(4.25, -0.49), 0.51, 0.005);
}

TEST(Quotas, DegenerateAlpha) {
  const auto schema = make_schema({3, 2});
  const auto inst = make_instance(uniform_stats(schema, 1000), 110, 110, 1.0, 2);
  ASSERT_DOUBLE_EQ(inst.alpha, 1.0);
  const auto qs = compute_quotas(inst);
  for (std::size_t p = 0; p < schema.num_pairs(); ++p) {
    EXPECT_EQ(qs.lower[p], 0);
    EXPECT_EQ(qs.upper[p], 110);
  }
}

TEST(Quotas, InvariantsOnRandomInstances) {
  auto rng = numerics::split_stream(77, 0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.uniform_index(6));
    for (auto &s : sizes)
      s = 2 + rng.uniform_index(10);
    const auto schema = make_schema(sizes);
    PopulationStats stats{1000000, std::vector<double>(schema.num_pairs())};
    for (std::size_t f = 0; f < sizes.size(); ++f) {
      std::vector<double> w(sizes[f]);
      double t = 0;
      for (auto &x : w)
        t += x = rng.uniform() + 0.01;
      for (std::size_t v = 0; v < sizes[f]; ++v)
        stats.counts[schema.pair_index(f, v)] = 1e6 * w[v] / t;
    }
    const std::uint64_t k = 1 + rng.uniform_index(200);
    const std::uint64_t r = k + rng.uniform_index(100000);
    const double qstar = 0.001 + rng.uniform() * 0.999;
    const auto inst = make_instance(stats, r, k, qstar, sizes.size());
    const auto qs = compute_quotas(inst);
    const auto kk = static_cast<std::int64_t>(k);
    for (std::size_t f = 0; f < sizes.size(); ++f) {
      std::int64_t lo = 0, hi = 0;
      for (std::size_t v = 0; v < sizes[f]; ++v) {
        const auto p = schema.pair_index(f, v);
        EXPECT_LE(0, qs.lower[p]);
        EXPECT_LE(qs.lower[p], qs.upper[p]);
        EXPECT_LE(qs.upper[p], kk);
        lo += qs.lower[p];
        hi += qs.upper[p];
      }
      EXPECT_LE(lo, kk);
      EXPECT_GE(hi, kk);
    }
  }
}

TEST(RescaleAndCap, Example) {
  const auto out = rescale_and_cap(std::vector<double>{1.5, 0.3, 0.2}, 2);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_NEAR(out[1], 0.6, 1e-15);
  EXPECT_NEAR(out[2], 0.4, 1e-15);
}

TEST(RescaleAndCap, IdentityWhenFeasible) {
  const std::vector<double> pi{0.5, 0.25, 0.25, 1.0};
  EXPECT_EQ(rescale_and_cap(pi, 2), pi);
}

TEST(RescaleAndCap, Infeasible) {
  try {
    rescale_and_cap(std::vector<double>{1.5, 0.5}, 3);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::InfeasibleCap);
  }
}

TEST(RescaleAndCap, RandomOverUnitVectors) {
  auto rng = numerics::split_stream(12, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(60);
    const std::uint64_t k = 1 + rng.uniform_index(n - 1);
    std::vector<double> w(n);
    double t = 0;
    for (auto &x : w)
      t += x = std::pow(rng.uniform() + 1e-3, 4.0);
    for (auto &x : w)
      x *= static_cast<double>(k) / t;
    const auto out = rescale_and_cap(w, k);
    double s = 0;
    for (double x : out) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
      s += x;
    }
    EXPECT_NEAR(s, static_cast<double>(k), 1e-9 * static_cast<double>(k));
    // Uncapped entries keep their relative order.
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (out[i] < 1.0 && out[i + 1] < 1.0) {
        if (w[i] < w[i + 1]) {
          EXPECT_LE(out[i], out[i + 1]);
        }
        if (w[i] > w[i + 1]) {
          EXPECT_GE(out[i], out[i + 1]);
        }
      }
  }
}
