#pragma once
// Participation model q_i = β_0·Π_f β_{f,f(i)} fitted by maximum likelihood
// from a pool (z = 1) against a weighted background sample (z = 0) that may
// itself contain participants.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sortition/error.hpp"
#include "sortition/schema.hpp"

namespace sortition {

struct DesignRow {
  /// Intercept followed by one indicator per feature-value pair.
  std::vector<std::uint8_t> indicators;
  int z = 0;
  double w = 1.0;
};

inline std::vector<std::uint8_t> design_vector(const FeatureSchema &schema, const Agent &agent) {
  if (agent.values.size() != schema.num_features())
    throw Error(ErrorKind::SchemaMismatch, "agent '" + agent.id + "' does not fit the schema");
  std::vector<std::uint8_t> x(1 + schema.num_pairs(), 0);
  x[0] = 1;
  for (std::size_t f = 0; f < schema.num_features(); ++f) {
    if (agent.values[f] >= schema.feature(f).values.size())
      throw Error(ErrorKind::SchemaMismatch, "agent '" + agent.id + "' has an unknown value");
    x[1 + schema.pair_index(f, agent.values[f])] = 1;
  }
  return x;
}

inline std::vector<DesignRow> build_design(const Dataset &pool, const Dataset &background) {
  if (!(pool.schema() == background.schema()))
    throw Error(ErrorKind::SchemaMismatch, "pool and background use different schemas");
  std::vector<DesignRow> rows;
  rows.reserve(pool.size() + background.size());
  for (const auto &a : pool.agents())
    rows.push_back({design_vector(pool.schema(), a), 1, 1.0});
  for (const auto &a : background.agents())
    rows.push_back({design_vector(background.schema(), a), 0, a.weight});
  return rows;
}

namespace detail {

// Rows sharing indicators and label are merged, summing weights. The
// likelihood is linear in the per-row weights, so this is exact.
struct CompressedRow {
  std::vector<std::size_t> ones; // positions of nonzero indicators
  double pos = 0.0;              // Σ z_i over merged rows
  double w = 0.0;                // Σ w_i over merged rows
};

inline std::vector<CompressedRow> compress(std::span<const DesignRow> rows) {
  std::map<std::vector<std::uint8_t>, CompressedRow> groups;
  for (const auto &r : rows) {
    auto [it, fresh] = groups.try_emplace(r.indicators);
    if (fresh)
      for (std::size_t j = 0; j < r.indicators.size(); ++j)
        if (r.indicators[j])
          it->second.ones.push_back(j);
    it->second.pos += r.z;
    it->second.w += r.w;
  }
  std::vector<CompressedRow> out;
  out.reserve(groups.size());
  for (auto &[key, row] : groups)
    out.push_back(std::move(row));
  return out;
}

inline double contamination(double qbar, double background_size, double pool_size) {
  if (!(qbar > 0.0 && qbar < 1.0) || !std::isfinite(qbar))
    throw Error(ErrorKind::Diverged, "q̄ must lie strictly between 0 and 1");
  if (!(background_size > 0.0) || !(pool_size > 0.0))
    throw Error(ErrorKind::Diverged, "background and pool sizes must be positive");
  return qbar * background_size / pool_size;
}

inline double objective(std::span<const double> theta, std::span<const CompressedRow> rows,
                        double c, std::vector<double> *grad) {
  double total = 0.0;
  if (grad)
    grad->assign(theta.size(), 0.0);
  for (const auto &r : rows) {
    double s = 0.0;
    for (std::size_t j : r.ones)
      s += theta[j];
    const double e = std::exp(s);
    total += r.pos * s - r.w * std::log(c + e);
    if (grad) {
      const double g = r.pos - r.w * e / (c + e);
      for (std::size_t j : r.ones)
        (*grad)[j] += g;
    }
  }
  return total;
}

} // namespace detail

/// L′(θ) = Σ_i z_i·θ·x_i − w_i·log(q̄·|B|/|P| + e^{θ·x_i}).
inline double log_likelihood(std::span<const double> theta, std::span<const DesignRow> rows,
                             double qbar, double background_size, double pool_size) {
  const double c = detail::contamination(qbar, background_size, pool_size);
  double total = 0.0;
  for (const auto &r : rows) {
    double s = 0.0;
    for (std::size_t j = 0; j < r.indicators.size(); ++j)
      if (r.indicators[j])
        s += theta[j];
    total += r.z * s - r.w * std::log(c + std::exp(s));
  }
  return total;
}

inline std::vector<double> log_likelihood_gradient(std::span<const double> theta,
                                                   std::span<const DesignRow> rows, double qbar,
                                                   double background_size, double pool_size) {
  const double c = detail::contamination(qbar, background_size, pool_size);
  std::vector<double> g(theta.size(), 0.0);
  for (const auto &r : rows) {
    double s = 0.0;
    for (std::size_t j = 0; j < r.indicators.size(); ++j)
      if (r.indicators[j])
        s += theta[j];
    const double e = std::exp(s);
    const double d = r.z - r.w * e / (c + e);
    for (std::size_t j = 0; j < r.indicators.size(); ++j)
      if (r.indicators[j])
        g[j] += d;
  }
  return g;
}

struct ParticipationModel {
  std::vector<double> theta;
  FeatureSchema schema;
  double qbar = 0.0;

  double beta(std::size_t j) const { return std::exp(theta[j]); }
};

inline double predict_q(const ParticipationModel &model, const Agent &agent) {
  const auto x = design_vector(model.schema, agent);
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (x[j])
      s += model.theta[j];
  return std::exp(s);
}

inline std::vector<double> predict_q(const ParticipationModel &model, const Dataset &data) {
  if (!(data.schema() == model.schema))
    throw Error(ErrorKind::SchemaMismatch, "dataset schema differs from the model's");
  std::vector<double> q;
  q.reserve(data.size());
  for (const auto &a : data.agents())
    q.push_back(predict_q(model, a));
  return q;
}

struct FitOptions {
  double step = 1e-5;
  std::size_t iters = 100000;
  /// Stop early once the objective gain over an iteration falls below this.
  std::optional<double> tolerance;
};

struct FitReport {
  double initial_objective = 0.0;
  double final_objective = 0.0;
  std::size_t iterations = 0;
  std::size_t step_halvings = 0;
  /// Smallest change between consecutive accepted objectives (≥ −1e-12·|L|).
  double min_objective_change = 0.0;
};

/// Moves the largest θ_{f,v} of each feature into the intercept. Predictions
/// are unchanged, every entry stays ≤ 0, and each feature gets a reference
/// value with β = 1, which pins down the otherwise free per-feature shift.
inline void canonicalize_theta(std::vector<double> &theta, const FeatureSchema &schema) {
  for (std::size_t f = 0; f < schema.num_features(); ++f) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < schema.feature(f).values.size(); ++v)
      top = std::max(top, theta[1 + schema.pair_index(f, v)]);
    for (std::size_t v = 0; v < schema.feature(f).values.size(); ++v)
      theta[1 + schema.pair_index(f, v)] -= top;
    theta[0] += top;
  }
  theta[0] = std::min(theta[0], 0.0);
}

/// Projected gradient ascent on L′ under θ ≤ 0, starting from log(q̄)·e₀.
/// Deterministic; a step that lowers the objective is retried at half length.
inline ParticipationModel fit_mle(std::span<const DesignRow> rows, const FeatureSchema &schema,
                                  double qbar, double background_size, double pool_size,
                                  const FitOptions &opt = {}, FitReport *report = nullptr) {
  const double c = detail::contamination(qbar, background_size, pool_size);
  if (!(opt.step > 0.0))
    throw Error(ErrorKind::InvalidArgument, "step must be positive");
  const std::size_t M = 1 + schema.num_pairs();
  for (const auto &r : rows)
    if (r.indicators.size() != M)
      throw Error(ErrorKind::SchemaMismatch, "design row length does not match the schema");
  const auto data = detail::compress(rows);

  std::vector<double> theta(M, 0.0), trial(M), grad;
  theta[0] = std::log(qbar);
  double obj = detail::objective(theta, data, c, &grad);
  if (!std::isfinite(obj))
    throw Error(ErrorKind::Diverged, "objective is not finite at the starting point");
  FitReport rep;
  rep.initial_objective = obj;
  rep.min_objective_change = std::numeric_limits<double>::infinity();
  double step = opt.step;
  std::size_t it = 0;
  for (; it < opt.iters; ++it) {
    double next = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t j = 0; j < M; ++j)
        trial[j] = std::min(0.0, theta[j] + step * grad[j]);
      next = detail::objective(trial, data, c, nullptr);
      if (!std::isfinite(next))
        throw Error(ErrorKind::Diverged, "objective became non-finite");
      if (next >= obj) {
        accepted = true;
        break;
      }
      step *= 0.5;
      ++rep.step_halvings;
    }
    if (!accepted)
      break; // no ascent direction left at machine precision
    const double gain = next - obj;
    rep.min_objective_change = std::min(rep.min_objective_change, gain);
    theta.swap(trial);
    obj = detail::objective(theta, data, c, &grad);
    step = std::min(opt.step, 2.0 * step);
    if (opt.tolerance && gain < *opt.tolerance) {
      ++it;
      break;
    }
  }
  canonicalize_theta(theta, schema);
  rep.final_objective = detail::objective(theta, data, c, nullptr);
  rep.iterations = it;
  if (!std::isfinite(rep.min_objective_change))
    rep.min_objective_change = 0.0;
  if (report)
    *report = rep;
  return {std::move(theta), schema, qbar};
}

/// q̄ = pool size / (letters · eligible persons per household).
inline double estimate_qbar(double pool_size, double letters, double persons_per_household) {
  if (!(pool_size > 0.0 && letters > 0.0 && persons_per_household > 0.0))
    throw Error(ErrorKind::InvalidArgument, "q̄ inputs must be positive");
  return pool_size / (letters * persons_per_household);
}

/// Σ w_i / Σ (w_i / h_i): average eligible persons per household when
/// individuals are sampled with probability proportional to household size.
inline double household_average(const Dataset &background) {
  double num = 0.0, den = 0.0;
  for (const auto &a : background.agents()) {
    if (!a.household_size)
      throw Error(ErrorKind::MissingHouseholdColumn,
                  "agent '" + a.id + "' has no household size");
    if (!(*a.household_size >= 1.0))
      throw Error(ErrorKind::InvalidArgument, "household size below 1 for '" + a.id + "'");
    num += a.weight;
    den += a.weight / *a.household_size;
  }
  if (!(den > 0.0))
    throw Error(ErrorKind::EmptyDataset, "background is empty");
  return num / den;
}

/// Weighted mean of predicted q over a dataset (calibration against q̄).
inline double mean_predicted_q(const ParticipationModel &model, const Dataset &data) {
  const auto q = predict_q(model, data);
  double s = 0.0, w = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    s += data.agent(i).weight * q[i];
    w += data.agent(i).weight;
  }
  if (!(w > 0.0))
    throw Error(ErrorKind::EmptyDataset, "dataset is empty");
  return s / w;
}

inline nlohmann::json model_to_json(const ParticipationModel &model) {
  return {{"qbar", model.qbar}, {"theta", model.theta}, {"schema_ref", model.schema.fingerprint()}};
}

inline ParticipationModel model_from_json(const nlohmann::json &doc, const FeatureSchema &schema) {
  ParticipationModel m;
  try {
    if (doc.at("schema_ref").get<std::string>() != schema.fingerprint())
      throw Error(ErrorKind::SchemaMismatch, "model was fitted against a different schema");
    m.qbar = doc.at("qbar").get<double>();
    m.theta = doc.at("theta").get<std::vector<double>>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed model: ") + e.what());
  }
  if (m.theta.size() != 1 + schema.num_pairs())
    throw Error(ErrorKind::SchemaMismatch, "model has the wrong number of parameters");
  for (double t : m.theta)
    if (!(t <= 0.0))
      throw Error(ErrorKind::InvalidArgument, "model parameters must be nonpositive");
  m.schema = schema;
  return m;
}

/// Human-readable β per parameter.
inline nlohmann::json beta_report(const ParticipationModel &model) {
  nlohmann::json out = nlohmann::json::array();
  out.push_back({{"parameter", "baseline"}, {"beta", model.beta(0)}});
  for (std::size_t p = 0; p < model.schema.num_pairs(); ++p)
    out.push_back({{"parameter", model.schema.pair_label(p)}, {"beta", model.beta(1 + p)}});
  return out;
}

} // namespace sortition
