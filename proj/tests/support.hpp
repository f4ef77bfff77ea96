#pragma once
// Helpers shared by the unit tests.

#include <string>
#include <vector>

#include "sortition/numerics/random.hpp"
#include "sortition/schema.hpp"

namespace testing_support {

inline sortition::FeatureSchema make_schema(const std::vector<std::size_t> &sizes) {
  std::vector<sortition::Feature> features;
  for (std::size_t f = 0; f < sizes.size(); ++f) {
    sortition::Feature feat{"f" + std::to_string(f), {}};
    for (std::size_t v = 0; v < sizes[f]; ++v)
      feat.values.push_back("v" + std::to_string(v));
    features.push_back(std::move(feat));
  }
  return sortition::FeatureSchema(std::move(features));
}

inline sortition::Dataset random_dataset(const sortition::FeatureSchema &schema, std::size_t n,
                                         sortition::numerics::RandomStream &rng,
                                         sortition::DatasetKind kind =
                                             sortition::DatasetKind::pool) {
  std::vector<sortition::Agent> agents;
  for (std::size_t i = 0; i < n; ++i) {
    sortition::Agent a{"a" + std::to_string(i), {}, 1.0, std::nullopt};
    for (std::size_t f = 0; f < schema.num_features(); ++f)
      a.values.push_back(rng.uniform_index(schema.feature(f).values.size()));
    agents.push_back(std::move(a));
  }
  return sortition::Dataset(schema, std::move(agents), kind);
}

/// Random marginals in [0, 1] summing to k exactly (up to round-off).
inline std::vector<double> random_marginals(std::size_t n, std::size_t k,
                                            sortition::numerics::RandomStream &rng) {
  std::vector<double> w(n);
  for (auto &x : w)
    x = 0.05 + rng.uniform();
  // Water-fill so no entry exceeds 1.
  std::vector<double> pi(n, 0.0);
  std::vector<bool> capped(n, false);
  double remaining = static_cast<double>(k);
  for (;;) {
    double free_w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!capped[i])
        free_w += w[i];
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i)
      if (!capped[i] && remaining * w[i] / free_w > 1.0) {
        capped[i] = true;
        pi[i] = 1.0;
        remaining -= 1.0;
        changed = true;
      }
    if (!changed) {
      for (std::size_t i = 0; i < n; ++i)
        if (!capped[i])
          pi[i] = remaining * w[i] / free_w;
      return pi;
    }
  }
}

} // namespace testing_support
