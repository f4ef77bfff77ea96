#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "oracles/lp_vertices.hpp"
#include "sortition/marginals.hpp"
#include "sortition/rounding/beck_fiala.hpp"
#include "sortition/rounding/column_generation.hpp"
#include "sortition/rounding/panel.hpp"
#include "support.hpp"

using namespace sortition;
using testing_support::make_schema;
using testing_support::random_dataset;
using testing_support::random_marginals;

namespace {

Dataset featureless_pool(std::size_t n) {
  std::vector<Agent> agents;
  for (std::size_t i = 0; i < n; ++i)
    agents.push_back({"p" + std::to_string(i), {}, 1.0, std::nullopt});
  return Dataset(FeatureSchema(std::vector<Feature>{}), agents, DatasetKind::pool);
}

void expect_rounding_postconditions(const std::vector<std::uint8_t> &x,
                                    const std::vector<double> &pi, const Dataset &pool) {
  const double k = std::round(std::accumulate(pi.begin(), pi.end(), 0.0));
  std::size_t ones = 0;
  for (auto b : x) {
    ASSERT_TRUE(b == 0 || b == 1);
    ones += b;
  }
  EXPECT_EQ(static_cast<double>(ones), k);
  std::vector<double> xd(x.begin(), x.end());
  const auto got = pair_sums(pool, xd);
  const auto want = pair_sums(pool, pi);
  const double F = static_cast<double>(pool.schema().num_features());
  for (std::size_t p = 0; p < got.size(); ++p)
    EXPECT_LE(std::abs(got[p] - want[p]), F + 1e-9) << "pair " << p;
}

} // namespace

TEST(BeckFiala, IntegralInputUnchanged) {
  const auto pool = featureless_pool(4);
  const std::vector<double> pi{1, 0, 1, 0};
  const auto x = beck_fiala_round(pi, pool);
  EXPECT_EQ(x, (std::vector<std::uint8_t>{1, 0, 1, 0}));
}

TEST(BeckFiala, ConstraintCoveringEveryoneIsRedundant) {
  const auto schema = make_schema({2});
  std::vector<Agent> agents;
  for (int i = 0; i < 9; ++i)
    agents.push_back({std::to_string(i), {0}, 1.0, std::nullopt});
  const Dataset pool(schema, agents, DatasetKind::pool);
  std::vector<double> pi(9, 4.0 / 9.0);
  RoundingStats st;
  const auto x = beck_fiala_round(pi, pool, std::nullopt, &st);
  EXPECT_EQ(std::accumulate(x.begin(), x.end(), 0), 4);
  EXPECT_GE(st.dropped_redundant + st.dropped_small, 1u);
}

TEST(BeckFiala, RandomInstancesSatisfyBounds) {
  auto rng = numerics::split_stream(200, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> sizes(3);
    for (auto &s : sizes)
      s = 2 + rng.uniform_index(3);
    const auto schema = make_schema(sizes);
    const auto pool = random_dataset(schema, 50, rng);
    const auto pi = random_marginals(50, 10, rng);
    RoundingStats st;
    const auto x = beck_fiala_round(pi, pool, std::nullopt, &st);
    expect_rounding_postconditions(x, pi, pool);
    EXPECT_LE(st.kernel_steps + st.dropped_redundant + st.dropped_small,
              pool.size() + schema.num_pairs() + 1);
  }
}

TEST(BeckFiala, ObjectiveDoesNotDecrease) {
  auto rng = numerics::split_stream(201, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.uniform_index(4));
    for (auto &s : sizes)
      s = 2 + rng.uniform_index(3);
    const auto schema = make_schema(sizes);
    const std::size_t n = 10 + rng.uniform_index(80);
    const std::size_t k = 1 + rng.uniform_index(n / 2);
    const auto pool = random_dataset(schema, n, rng);
    const auto pi = random_marginals(n, k, rng);
    std::vector<double> c(n);
    for (auto &v : c)
      v = rng.uniform() * 2.0 - 1.0;
    const auto x = beck_fiala_round(pi, pool, std::span<const double>(c));
    expect_rounding_postconditions(x, pi, pool);
    double cx = 0, cpi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      cx += c[i] * x[i];
      cpi += c[i] * pi[i];
    }
    EXPECT_GE(cx, cpi - 1e-7 * numerics::norm_inf(c) * static_cast<double>(k));
  }
}

TEST(BeckFiala, ObjectiveSteersTowardHighValues) {
  // Everything is fractional and unconstrained except Σx = k, so the best
  // possible rounding picks the k largest entries of c.
  const auto pool = featureless_pool(20);
  std::vector<double> pi(20, 0.25), c(20);
  for (std::size_t i = 0; i < 20; ++i)
    c[i] = static_cast<double>((i * 7) % 20);
  const auto x = beck_fiala_round(pi, pool, std::span<const double>(c));
  double cx = 0;
  for (std::size_t i = 0; i < 20; ++i)
    cx += c[i] * x[i];
  EXPECT_GE(cx, 0.25 * std::accumulate(c.begin(), c.end(), 0.0));
}

TEST(BeckFiala, Deterministic) {
  auto rng = numerics::split_stream(202, 0);
  const auto schema = make_schema({4, 3, 2});
  const auto pool = random_dataset(schema, 120, rng);
  const auto pi = random_marginals(120, 17, rng);
  EXPECT_EQ(beck_fiala_round(pi, pool), beck_fiala_round(pi, pool));
}

TEST(BeckFiala, RandomizedSatisfiesBounds) {
  auto rng = numerics::split_stream(203, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto schema = make_schema({2 + rng.uniform_index(3), 2 + rng.uniform_index(4)});
    const std::size_t n = 5 + rng.uniform_index(60);
    const auto pool = random_dataset(schema, n, rng);
    const auto pi = random_marginals(n, 1 + rng.uniform_index(n - 1), rng);
    expect_rounding_postconditions(randomized_round(pi, pool, rng), pi, pool);
  }
}

TEST(BeckFiala, RandomizedIsUnbiased) {
  auto rng = numerics::split_stream(204, 0);
  const auto schema = make_schema({3, 2});
  const auto pool = random_dataset(schema, 15, rng);
  const auto pi = random_marginals(15, 4, rng);
  const int draws = 20000;
  std::vector<double> freq(15, 0.0);
  for (int d = 0; d < draws; ++d) {
    const auto x = randomized_round(pi, pool, rng);
    for (std::size_t i = 0; i < 15; ++i)
      freq[i] += x[i];
  }
  for (std::size_t i = 0; i < 15; ++i) {
    const double sd = std::sqrt(pi[i] * (1 - pi[i]) / draws);
    EXPECT_NEAR(freq[i] / draws, pi[i], 4.5 * sd + 1e-12) << "agent " << i;
  }
}

TEST(BeckFiala, RejectsBadInput) {
  const auto pool = featureless_pool(3);
  EXPECT_THROW(beck_fiala_round(std::vector<double>{0.5, 0.5}, pool), Error);
  EXPECT_THROW(beck_fiala_round(std::vector<double>{1.5, 0.5, 0.0}, pool), Error);
  EXPECT_THROW(beck_fiala_round(std::vector<double>{0.5, 0.4, 0.4}, pool), Error);
}

TEST(ColumnGeneration, FourAgentsHalfEach) {
  const auto pool = featureless_pool(4);
  const std::vector<double> pi(4, 0.5);
  const auto dist = build_panel_distribution(pi, pool, QuotaSet{});
  EXPECT_LE(dist.max_marginal_error, 1e-6);
  const auto m = implied_marginals(dist, 4);
  for (double x : m)
    EXPECT_NEAR(x, 0.5, 1e-6);
  double total = 0;
  for (std::size_t b = 0; b < dist.panels.size(); ++b) {
    EXPECT_EQ(dist.panels[b].members.size(), 2u);
    EXPECT_GE(dist.weights[b], 0.0);
    total += dist.weights[b];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);

  // Oracle: the marginal-matching problem over all C(4,2) panels is feasible.
  oracle::SmallLp lp;
  std::vector<std::vector<int>> panels;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      panels.push_back({a, b});
  lp.c.assign(panels.size(), 0.0);
  lp.lower.assign(panels.size(), 0.0);
  lp.upper.assign(panels.size(), 1.0);
  for (int i = 0; i < 4; ++i) {
    std::vector<double> row(panels.size(), 0.0);
    for (std::size_t j = 0; j < panels.size(); ++j)
      row[j] = (panels[j][0] == i || panels[j][1] == i) ? 1.0 : 0.0;
    lp.a.push_back(row);
    lp.b.push_back(pi[i]);
  }
  // The four marginal rows already imply Σλ = 2·(sum of marginals)/2 = 1,
  // so they alone form a full-rank system.
  EXPECT_TRUE(oracle::vertex_enumeration_min(lp).has_value());
}

TEST(ColumnGeneration, IntegralMarginalsGiveOnePanel) {
  auto rng = numerics::split_stream(5, 0);
  const auto schema = make_schema({2, 3});
  const auto pool = random_dataset(schema, 12, rng);
  std::vector<double> pi(12, 0.0);
  pi[1] = pi[4] = pi[7] = 1.0;
  const auto dist = build_panel_distribution(pi, pool, QuotaSet{});
  ASSERT_EQ(dist.panels.size(), 1u);
  EXPECT_EQ(dist.weights[0], 1.0);
  EXPECT_EQ(dist.max_marginal_error, 0.0);
  EXPECT_EQ(dist.panels[0].members, (std::vector<std::size_t>{1, 4, 7}));
}

TEST(ColumnGeneration, RandomInstancesMeetEpsilonAndBounds) {
  auto rng = numerics::split_stream(300, 0);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.uniform_index(3));
    for (auto &s : sizes)
      s = 2 + rng.uniform_index(3);
    const auto schema = make_schema(sizes);
    const std::size_t n = 8 + rng.uniform_index(40);
    const std::size_t k = 2 + rng.uniform_index(n / 3);
    const auto pool = random_dataset(schema, n, rng);
    const auto pi = random_marginals(n, k, rng);
    // Odd trials run the bare separation loop from a single panel.
    ColumnGenerationOptions opt;
    if (trial % 2)
      opt.seed_panels = 0;
    ColumnGenerationTrace trace;
    const auto dist = build_panel_distribution(pi, pool, QuotaSet{}, opt, &trace);
    EXPECT_LE(dist.max_marginal_error, 1e-6);
    EXPECT_NEAR(max_marginal_error(dist, pi), dist.max_marginal_error, 1e-15);
    const auto targets = pair_sums(pool, pi);
    double total = 0;
    for (std::size_t b = 0; b < dist.panels.size(); ++b) {
      const auto &panel = dist.panels[b];
      EXPECT_EQ(panel.members.size(), k);
      for (std::size_t p = 0; p < targets.size(); ++p)
        EXPECT_LE(std::abs(static_cast<double>(panel.seat_counts[p]) - targets[p]),
                  static_cast<double>(sizes.size()) + 1e-9);
      EXPECT_GT(dist.weights[b], 0.0);
      total += dist.weights[b];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    // Strong duality of every restricted master problem, and every new
    // panel is a violated dual constraint.
    for (std::size_t r = 0; r < trace.deltas.size(); ++r)
      EXPECT_NEAR(trace.dual_objectives[r], trace.deltas[r], 1e-8);
    for (double v : trace.violations)
      EXPECT_GT(v, 0.0);
  }
}

TEST(ColumnGeneration, IterationLimit) {
  auto rng = numerics::split_stream(301, 0);
  const auto schema = make_schema({3, 2});
  const auto pool = random_dataset(schema, 40, rng);
  const auto pi = random_marginals(40, 7, rng);
  ColumnGenerationOptions opt;
  opt.max_iterations = 1;
  opt.seed_panels = 0;
  try {
    build_panel_distribution(pi, pool, QuotaSet{}, opt);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::IterationLimit);
  }
}

TEST(ColumnGeneration, QuotaViolationIsReported) {
  auto rng = numerics::split_stream(302, 0);
  const auto schema = make_schema({2});
  const auto pool = random_dataset(schema, 20, rng);
  const auto pi = random_marginals(20, 6, rng);
  QuotaSet impossible{{0, 0}, {0, 0}};
  try {
    build_panel_distribution(pi, pool, impossible);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::QuotaViolation);
  }
}

TEST(ColumnGeneration, Deterministic) {
  auto rng = numerics::split_stream(303, 0);
  const auto schema = make_schema({3, 3});
  const auto pool = random_dataset(schema, 30, rng);
  const auto pi = random_marginals(30, 5, rng);
  const auto a = build_panel_distribution(pi, pool, QuotaSet{});
  const auto b = build_panel_distribution(pi, pool, QuotaSet{});
  ASSERT_EQ(a.panels.size(), b.panels.size());
  for (std::size_t i = 0; i < a.panels.size(); ++i) {
    EXPECT_EQ(a.panels[i].members, b.panels[i].members);
    EXPECT_EQ(a.weights[i], b.weights[i]);
  }
}

TEST(SamplePanel, SinglePanel) {
  const auto pool = featureless_pool(3);
  PanelDistribution dist;
  dist.panels.push_back(make_panel(pool, {0, 2}));
  dist.weights = {1.0};
  auto rng = numerics::split_stream(1, 0);
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(sample_panel(dist, rng).members, (std::vector<std::size_t>{0, 2}));
}

TEST(SamplePanel, FrequenciesMatchWeights) {
  const auto pool = featureless_pool(3);
  PanelDistribution dist;
  dist.panels.push_back(make_panel(pool, {0}));
  dist.panels.push_back(make_panel(pool, {1}));
  dist.weights = {0.25, 0.75};
  auto rng = numerics::split_stream(2, 0);
  int first = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    first += sample_panel(dist, rng).members[0] == 0;
  EXPECT_NEAR(first / static_cast<double>(draws), 0.25, 0.01);
}

TEST(SamplePanel, InclusionFrequenciesMatchMarginals) {
  auto rng = numerics::split_stream(304, 0);
  const auto schema = make_schema({3, 2});
  const auto pool = random_dataset(schema, 25, rng);
  const auto pi = random_marginals(25, 6, rng);
  const auto dist = build_panel_distribution(pi, pool, QuotaSet{});
  std::vector<int> hits(25, 0);
  const int draws = 100000;
  for (int d = 0; d < draws; ++d)
    for (std::size_t i : sample_panel(dist, rng).members)
      ++hits[i];
  for (std::size_t i = 0; i < 25; ++i)
    EXPECT_NEAR(hits[i] / static_cast<double>(draws), pi[i], 0.01);
}

TEST(PanelDistributionJson, RoundTrip) {
  auto rng = numerics::split_stream(305, 0);
  const auto schema = make_schema({2, 2});
  const auto pool = random_dataset(schema, 15, rng);
  const auto pi = random_marginals(15, 4, rng);
  const auto dist = build_panel_distribution(pi, pool, QuotaSet{});
  const auto doc = distribution_to_json(dist, pool);
  EXPECT_EQ(doc["panels"].size(), dist.panels.size());
  EXPECT_EQ(doc["panels"][0]["members"].size(), 4u);
  const auto back = distribution_from_json(doc, pool);
  ASSERT_EQ(back.panels.size(), dist.panels.size());
  for (std::size_t b = 0; b < back.panels.size(); ++b) {
    EXPECT_EQ(back.panels[b].members, dist.panels[b].members);
    EXPECT_EQ(back.panels[b].seat_counts, dist.panels[b].seat_counts);
    EXPECT_EQ(back.weights[b], dist.weights[b]);
  }
}
