#pragma once
// Panels, distributions over panels, and sampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sortition/error.hpp"
#include "sortition/numerics/random.hpp"
#include "sortition/schema.hpp"

namespace sortition {

struct Panel {
  /// Sorted pool indices.
  std::vector<std::size_t> members;
  /// Realized seats per feature-value pair.
  std::vector<std::int64_t> seat_counts;

  bool operator==(const Panel &o) const { return members == o.members; }
};

inline Panel make_panel(const Dataset &pool, std::vector<std::size_t> members) {
  std::sort(members.begin(), members.end());
  if (std::adjacent_find(members.begin(), members.end()) != members.end())
    throw Error(ErrorKind::InvalidArgument, "panel lists a member twice");
  Panel p;
  p.seat_counts.assign(pool.schema().num_pairs(), 0);
  for (std::size_t i : members) {
    if (i >= pool.size())
      throw Error(ErrorKind::InvalidArgument, "panel member outside the pool");
    for (std::size_t f = 0; f < pool.schema().num_features(); ++f)
      ++p.seat_counts[pool.pair_of(i, f)];
  }
  p.members = std::move(members);
  return p;
}

inline Panel panel_from_indicator(const Dataset &pool, std::span<const std::uint8_t> x) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i])
      members.push_back(i);
  return make_panel(pool, std::move(members));
}

struct PanelDistribution {
  std::vector<Panel> panels;
  std::vector<double> weights;
  double epsilon = 1e-6;
  /// max_i |π_i − Σ_{B∋i} λ_B|, by recount.
  double max_marginal_error = 0.0;
  /// Column generation rounds used to build the distribution.
  std::size_t iterations = 0;
};

/// Σ_{B∋i} λ_B for every pool member.
inline std::vector<double> implied_marginals(const PanelDistribution &dist,
                                             std::size_t pool_size) {
  std::vector<double> m(pool_size, 0.0);
  for (std::size_t b = 0; b < dist.panels.size(); ++b)
    for (std::size_t i : dist.panels[b].members)
      m[i] += dist.weights[b];
  return m;
}

inline double max_marginal_error(const PanelDistribution &dist, std::span<const double> pi) {
  const auto m = implied_marginals(dist, pi.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i)
    worst = std::max(worst, std::abs(pi[i] - m[i]));
  return worst;
}

inline const Panel &sample_panel(const PanelDistribution &dist, numerics::RandomStream &rng) {
  if (dist.panels.empty())
    throw Error(ErrorKind::InvalidArgument, "empty panel distribution");
  double total = 0.0;
  for (double w : dist.weights)
    total += w;
  double u = rng.uniform() * total;
  for (std::size_t b = 0; b < dist.panels.size(); ++b) {
    u -= dist.weights[b];
    if (u < 0.0)
      return dist.panels[b];
  }
  // Round-off: fall back to the last panel with positive weight.
  for (std::size_t b = dist.panels.size(); b-- > 0;)
    if (dist.weights[b] > 0.0)
      return dist.panels[b];
  return dist.panels.back();
}

inline nlohmann::json distribution_to_json(const PanelDistribution &dist, const Dataset &pool) {
  nlohmann::json panels = nlohmann::json::array();
  for (std::size_t b = 0; b < dist.panels.size(); ++b) {
    nlohmann::json ids = nlohmann::json::array();
    for (std::size_t i : dist.panels[b].members)
      ids.push_back(pool.agent(i).id);
    panels.push_back({{"weight", dist.weights[b]}, {"members", std::move(ids)}});
  }
  return {{"epsilon", dist.epsilon},
          {"max_marginal_error", dist.max_marginal_error},
          {"panels", std::move(panels)}};
}

inline PanelDistribution distribution_from_json(const nlohmann::json &doc, const Dataset &pool) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pool.size(); ++i)
    index.emplace(pool.agent(i).id, i);
  PanelDistribution dist;
  try {
    dist.epsilon = doc.at("epsilon").get<double>();
    dist.max_marginal_error = doc.value("max_marginal_error", 0.0);
    for (const auto &p : doc.at("panels")) {
      std::vector<std::size_t> members;
      for (const auto &id : p.at("members")) {
        const auto it = index.find(id.get<std::string>());
        if (it == index.end())
          throw Error(ErrorKind::InvalidArgument,
                      "panel member '" + id.get<std::string>() + "' is not in the pool");
        members.push_back(it->second);
      }
      dist.panels.push_back(make_panel(pool, std::move(members)));
      dist.weights.push_back(p.at("weight").get<double>());
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed distribution: ") + e.what());
  }
  return dist;
}

} // namespace sortition
