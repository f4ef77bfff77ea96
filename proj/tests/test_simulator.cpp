#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "sortition/simulator.hpp"
#include "support.hpp"

using namespace sortition;
using testing_support::make_schema;

namespace {

SyntheticPopulation two_feature_population(const std::vector<std::uint64_t> &counts,
                                           const std::vector<double> &q) {
  const auto schema = make_schema({2, 2});
  std::vector<Archetype> arch;
  for (std::size_t j = 0; j < counts.size(); ++j)
    arch.push_back({{"t" + std::to_string(j), {j % 2, (j / 2) % 2}, 1.0, std::nullopt},
                    counts[j], q[j]});
  return make_population(schema, arch);
}

// Individual-level reference simulation: shuffle, invite the first r, flip coins.
std::uint64_t individual_pool_size(const SyntheticPopulation &pop, std::uint64_t r,
                                   numerics::RandomStream &rng) {
  std::vector<double> q;
  for (const auto &a : pop.archetypes)
    for (std::uint64_t c = 0; c < a.count; ++c)
      q.push_back(a.q);
  rng.shuffle(std::span<double>(q));
  std::uint64_t size = 0;
  for (std::uint64_t i = 0; i < r; ++i)
    size += rng.bernoulli(q[i]);
  return size;
}

} // namespace

TEST(Hamilton, Examples) {
  EXPECT_EQ(hamilton_apportion(std::vector<double>{1, 1}, 4),
            (std::vector<std::uint64_t>{2, 2}));
  EXPECT_EQ(hamilton_apportion(std::vector<double>{1.4, 1.35, 1.25}, 4),
            (std::vector<std::uint64_t>{2, 1, 1}));
  EXPECT_EQ(hamilton_apportion(std::vector<double>{1, 1, 1}, 2),
            (std::vector<std::uint64_t>{1, 1, 0}));
  EXPECT_THROW(hamilton_apportion(std::vector<double>{0, 0}, 3), Error);
}

TEST(Hamilton, QuotaPropertyOnRandomWeights) {
  auto rng = numerics::split_stream(9, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> w(1 + rng.uniform_index(50));
    double sum = 0;
    for (auto &x : w)
      sum += x = rng.uniform() < 0.1 ? 0.0 : rng.uniform() * 10;
    if (sum == 0)
      continue;
    const std::uint64_t total = rng.uniform_index(trial % 2 ? 100 : 60'000'000);
    const auto c = hamilton_apportion(w, total);
    EXPECT_EQ(std::accumulate(c.begin(), c.end(), std::uint64_t{0}), total);
    for (std::size_t i = 0; i < w.size(); ++i)
      EXPECT_LT(std::abs(static_cast<double>(c[i]) - static_cast<double>(total) * w[i] / sum),
                1.0);
  }
}

TEST(Synthesize, CopiesFollowWeights) {
  const auto schema = make_schema({2});
  const Dataset bg(schema, {{"a", {0}, 1.0, {}}, {"b", {1}, 1.0, {}}}, DatasetKind::background);
  const ParticipationModel model{{std::log(0.1), 0.0, std::log(0.5)}, schema, 0.07};
  const auto pop = synthesize_population(bg, model, 10, 3);
  EXPECT_EQ(pop.n, 10u);
  EXPECT_EQ(pop.archetypes[0].count, 5u);
  EXPECT_EQ(pop.archetypes[1].count, 5u);
  EXPECT_NEAR(pop.archetypes[0].q, 0.1, 1e-15);
  EXPECT_NEAR(pop.archetypes[1].q, 0.05, 1e-15);
}

TEST(Synthesize, CompositionMatchesBackground) {
  auto rng = numerics::split_stream(10, 0);
  const auto schema = make_schema({3, 2, 4});
  std::vector<Agent> agents;
  for (int i = 0; i < 200; ++i)
    agents.push_back({std::to_string(i),
                      {rng.uniform_index(3), rng.uniform_index(2), rng.uniform_index(4)},
                      0.2 + 3 * rng.uniform(), std::nullopt});
  const Dataset bg(schema, agents, DatasetKind::background);
  const ParticipationModel model{std::vector<double>(1 + schema.num_pairs(), -0.5), schema, 0.1};
  const std::uint64_t n = 1'000'003;
  const auto pop = synthesize_population(bg, model, n, 0);
  EXPECT_EQ(pop.n, n);
  const auto stats = pop.stats();
  const auto bg_stats = population_stats_from_background(bg, n);
  for (std::size_t p = 0; p < schema.num_pairs(); ++p)
    EXPECT_LE(std::abs(stats.share(p) - bg_stats.share(p)), 1.0 / 200.0);
}

TEST(SimulatePool, EveryoneJoins) {
  const auto pop = two_feature_population({3, 4, 5, 6}, {1, 1, 1, 1});
  auto rng = numerics::split_stream(11, 0);
  EXPECT_EQ(simulate_pool_counts(pop, pop.n, rng), (std::vector<std::uint64_t>{3, 4, 5, 6}));
  EXPECT_EQ(simulate_pool(pop, pop.n, rng).size(), 18u);
}

TEST(SimulatePool, ZeroProbabilityNeverJoins) {
  const auto pop = two_feature_population({100, 100, 100, 100}, {0.5, 0.0, 0.3, 0.9});
  auto rng = numerics::split_stream(12, 0);
  for (int t = 0; t < 1000; ++t)
    EXPECT_EQ(simulate_pool_counts(pop, 250, rng)[1], 0u);
}

TEST(SimulatePool, MeanPoolSizeMatchesExpectation) {
  const std::vector<std::uint64_t> counts{5000, 3000, 1500, 500};
  const std::vector<double> q{0.05, 0.1, 0.3, 0.8};
  const auto pop = two_feature_population(counts, q);
  const std::uint64_t r = 2000;
  const double n = static_cast<double>(pop.n), rd = static_cast<double>(r);
  double mean = 0, m2 = 0, m1 = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    const double f = static_cast<double>(counts[j]) / n;
    mean += rd * f * q[j];
    m1 += f * q[j];
    m2 += f * q[j] * q[j];
  }
  double var = rd * (n - rd) / (n - 1) * (m2 - m1 * m1);
  for (std::size_t j = 0; j < 4; ++j)
    var += rd * static_cast<double>(counts[j]) / n * q[j] * (1 - q[j]);
  const int sims = 10000;
  double s = 0;
  for (int t = 0; t < sims; ++t) {
    auto rng = numerics::split_stream(13, static_cast<std::uint64_t>(t));
    const auto c = simulate_pool_counts(pop, r, rng);
    s += static_cast<double>(std::accumulate(c.begin(), c.end(), std::uint64_t{0}));
  }
  EXPECT_NEAR(s / sims, mean, 3.0 * std::sqrt(var / sims));
}

TEST(SimulatePool, ArchetypeAndIndividualSimulationAgree) {
  const auto pop = two_feature_population({6, 5, 5, 4}, {0.9, 0.5, 0.25, 0.1});
  const std::uint64_t r = 12;
  const int runs = 100000;
  std::vector<double> a(21, 0), b(21, 0);
  for (int t = 0; t < runs; ++t) {
    auto r1 = numerics::split_stream(14, static_cast<std::uint64_t>(t));
    const auto c = simulate_pool_counts(pop, r, r1);
    a[std::accumulate(c.begin(), c.end(), std::uint64_t{0})] += 1.0 / runs;
    auto r2 = numerics::split_stream(15, static_cast<std::uint64_t>(t));
    b[individual_pool_size(pop, r, r2)] += 1.0 / runs;
  }
  double tv = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    tv += 0.5 * std::abs(a[i] - b[i]);
  EXPECT_LE(tv, 0.02);
}

TEST(ArchetypeMarginals, AgreeWithIndividualComputation) {
  auto rng = numerics::split_stream(16, 0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint64_t> counts(4);
    std::vector<double> q(4);
    for (std::size_t j = 0; j < 4; ++j) {
      counts[j] = 200 + rng.uniform_index(2000);
      q[j] = 0.02 + 0.3 * rng.uniform();
    }
    const auto pop = two_feature_population(counts, q);
    const std::uint64_t r = 300 + rng.uniform_index(1500), k = 2 + rng.uniform_index(8);
    const auto inst = make_instance(pop.stats(), r, k, pop.min_q(), 2);
    const auto pc = simulate_pool_counts(pop, r, rng);
    if (std::accumulate(pc.begin(), pc.end(), std::uint64_t{0}) == 0)
      continue;
    std::vector<std::size_t> arch_of;
    const auto pool = pool_dataset(pop, pc, &arch_of);
    std::vector<double> pq;
    for (std::size_t j : arch_of)
      pq.push_back(q[j]);
    const auto pi = compute_marginals(pq, k);
    const auto ref = check_good_pool(pool, pq, pi, inst);
    std::vector<double> api;
    const auto got = archetype_marginals(pop, pc, inst, Policy::strict, api);
    EXPECT_EQ(got.conditions.cond1_ok, ref.cond1_ok);
    EXPECT_EQ(got.conditions.cond2_ok, ref.cond2_ok);
    EXPECT_EQ(got.conditions.cond3_ok, ref.cond3_ok);
    EXPECT_EQ(got.accepted, ref.good());
    for (std::size_t i = 0; i < pool.size(); ++i)
      EXPECT_NEAR(api[arch_of[i]], pi[i], 1e-12);
  }
}

TEST(ArchetypeMarginals, RelaxedCapsOverfullMarginals) {
  const auto pop = two_feature_population({1000, 1000, 1000, 1000}, {0.01, 0.5, 0.5, 0.5});
  const auto inst = make_instance(pop.stats(), 2000, 10, 0.01, 2);
  const std::vector<std::uint64_t> counts{2, 10, 10, 10};
  std::vector<double> pi;
  const auto strict = archetype_marginals(pop, counts, inst, Policy::strict, pi);
  EXPECT_FALSE(strict.conditions.cond1_ok);
  EXPECT_FALSE(strict.accepted);
  const auto relaxed = archetype_marginals(pop, counts, inst, Policy::relaxed, pi);
  EXPECT_TRUE(relaxed.capped);
  double total = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_LE(pi[j], 1.0);
    total += static_cast<double>(counts[j]) * pi[j];
  }
  EXPECT_NEAR(total, 10.0, 1e-9);
}

TEST(EndToEnd, UniformQWithLargeAlphaIsFair) {
  const auto pop = two_feature_population({2500, 2500, 2500, 2500}, {0.3, 0.3, 0.3, 0.3});
  EndToEndOptions opt;
  opt.r = 5000;
  opt.k = 10;
  opt.pools = 2000;
  opt.seed = 1;
  const auto rep = estimate_end_to_end(pop, opt);
  const double target = 10.0 / 10000.0;
  EXPECT_GE(rep.good_pools, opt.pools * 95 / 100);
  for (const auto &row : rep.rows)
    EXPECT_NEAR(row.estimate, target, 4.0 * row.std_error + 1e-12);
}

TEST(EndToEnd, UniformAlgorithmOnUniformPopulation) {
  const auto pop = two_feature_population({3000, 1000, 4000, 2000}, {0.2, 0.2, 0.2, 0.2});
  EndToEndOptions opt;
  opt.r = 800;
  opt.k = 10;
  opt.pools = 3000;
  opt.algorithm = Algorithm::uniform;
  opt.seed = 2;
  const auto rep = estimate_end_to_end(pop, opt);
  for (const auto &row : rep.rows)
    EXPECT_NEAR(row.estimate, 1e-3, 3.0 * row.std_error);
}

TEST(EndToEnd, ReproducibleAndRelaxedDominatesStrict) {
  const auto pop = two_feature_population({3000, 1000, 4000, 2000}, {0.05, 0.2, 0.1, 0.4});
  EndToEndOptions opt;
  opt.r = 250;
  opt.k = 8;
  opt.pools = 500;
  opt.seed = 3;
  const auto a = estimate_end_to_end(pop, opt);
  const auto b = estimate_end_to_end(pop, opt);
  for (std::size_t j = 0; j < a.rows.size(); ++j)
    EXPECT_EQ(a.rows[j].estimate, b.rows[j].estimate);
  opt.policy = Policy::relaxed;
  const auto c = estimate_end_to_end(pop, opt);
  EXPECT_GE(c.good_pools, a.good_pools);
  EXPECT_LE(a.cond3_failures, opt.pools);
}

TEST(EndToEnd, GreedyRunsAndCountsFailures) {
  const auto pop = two_feature_population({3000, 1000, 4000, 2000}, {0.05, 0.2, 0.1, 0.4});
  EndToEndOptions opt;
  opt.r = 400;
  opt.k = 8;
  opt.pools = 200;
  opt.algorithm = Algorithm::greedy;
  opt.seed = 4;
  const auto rep = estimate_end_to_end(pop, opt);
  for (const auto &row : rep.rows) {
    EXPECT_GE(row.estimate, 0.0);
    EXPECT_LE(row.estimate, 1.0);
  }
  EXPECT_LE(rep.good_pools, opt.pools);
}
