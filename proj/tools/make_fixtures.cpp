// Regenerates the CSV/JSON fixtures under data/. Deterministic; rerunning it
// reproduces the committed files byte for byte.
//
//   make_fixtures <data-dir>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "sortition/sortition.hpp"

using namespace sortition;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path &path, const std::string &content) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << content;
}

void write_json(const fs::path &path, const nlohmann::json &doc) {
  write_file(path, doc.dump(2) + "\n");
}

void write_csv(const fs::path &path, const Dataset &data) {
  std::ostringstream os;
  write_dataset(os, data);
  write_file(path, os.str());
}

Agent agent(std::string id, std::vector<std::size_t> values, double weight = 1.0,
            std::optional<double> household = std::nullopt) {
  return {std::move(id), std::move(values), weight, household};
}

std::size_t categorical(numerics::RandomStream &rng, const std::vector<double> &p) {
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (u < p[i])
      return i;
    u -= p[i];
  }
  return p.size() - 1;
}

// 12-member pool over two binary features whose composition is proportional
// to population share times q, so the pair sums of π hit k·share exactly.
void toy(const fs::path &dir) {
  const FeatureSchema schema(std::vector<Feature>{{"gender", {"female", "male"}},
                                                  {"age", {"young", "old"}}});
  write_json(dir / "schema.json", schema_to_json(schema));
  write_csv(dir / "background.csv",
            Dataset(schema,
                    {agent("b1", {0, 0}), agent("b2", {0, 1}), agent("b3", {1, 0}),
                     agent("b4", {1, 1})},
                    DatasetKind::background));
  const ParticipationModel model{{std::log(0.5), 0.0, 0.0, std::log(0.5), 0.0}, schema, 0.375};
  write_json(dir / "model.json", model_to_json(model));
  std::vector<Agent> pool;
  const std::size_t copies[4] = {2, 4, 2, 4};
  const std::vector<std::size_t> types[4] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  int id = 1;
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < copies[t]; ++c)
      pool.push_back(agent("p" + std::to_string(id++), types[t]));
  write_csv(dir / "pool.csv", Dataset(schema, pool, DatasetKind::pool));

  // k equals the pool size under uniform q: every marginal is 1.
  const ParticipationModel flat{{std::log(0.5), 0.0, 0.0, 0.0, 0.0}, schema, 0.5};
  write_json(dir / "integral_model.json", model_to_json(flat));
  write_csv(dir / "integral_pool.csv",
            Dataset(schema,
                    {agent("i1", {0, 0}), agent("i2", {0, 1}), agent("i3", {1, 0}),
                     agent("i4", {1, 1})},
                    DatasetKind::pool));
}

// Pool drawn from a known model, for fitting.
void estimate(const fs::path &dir) {
  const FeatureSchema schema(std::vector<Feature>{{"sex", {"female", "male"}},
                                                  {"education", {"degree", "school", "none"}},
                                                  {"area", {"urban", "rural"}}});
  const std::vector<std::vector<double>> shares{{0.5, 0.5}, {0.3, 0.4, 0.3}, {0.6, 0.4}};
  const std::vector<double> theta{std::log(0.15), 0.0, std::log(0.6), 0.0, std::log(0.7),
                                  std::log(0.4), std::log(0.5), 0.0};
  const ParticipationModel truth{theta, schema, 0.0};
  auto rng = numerics::split_stream(2024, 0);
  auto draw = [&](std::string id, double weight, std::optional<double> hh) {
    std::vector<std::size_t> v;
    for (const auto &s : shares)
      v.push_back(categorical(rng, s));
    return agent(std::move(id), std::move(v), weight, hh);
  };
  std::vector<Agent> bg;
  for (int i = 0; i < 3000; ++i)
    bg.push_back(draw("b" + std::to_string(i), 1.0, 1.0 + static_cast<double>(rng.uniform_index(4))));
  const std::uint64_t invited = 60000;
  std::vector<Agent> pool;
  for (std::uint64_t i = 0; i < invited; ++i) {
    auto a = draw("p" + std::to_string(i), 1.0, std::nullopt);
    if (rng.bernoulli(predict_q(truth, a)))
      pool.push_back(std::move(a));
  }
  write_json(dir / "schema.json", schema_to_json(schema));
  write_csv(dir / "background.csv", Dataset(schema, bg, DatasetKind::background));
  write_csv(dir / "pool.csv", Dataset(schema, pool, DatasetKind::pool));
  const double qbar = static_cast<double>(pool.size()) / static_cast<double>(invited);
  write_json(dir / "true_model.json",
             model_to_json(ParticipationModel{theta, schema, qbar}));
  std::cout << "estimate fixture: pool " << pool.size() << ", qbar " << qbar << "\n";
}

// Uniform q over a skewed 2x2 population, for simulator checks.
void uniform(const fs::path &dir) {
  const FeatureSchema schema(std::vector<Feature>{{"gender", {"female", "male"}},
                                                  {"age", {"young", "old"}}});
  write_json(dir / "schema.json", schema_to_json(schema));
  write_csv(dir / "background.csv",
            Dataset(schema,
                    {agent("b1", {0, 0}, 3.0), agent("b2", {0, 1}, 1.0), agent("b3", {1, 0}, 4.0),
                     agent("b4", {1, 1}, 2.0)},
                    DatasetKind::background));
  write_json(dir / "model.json",
             model_to_json({{std::log(0.2), 0.0, 0.0, 0.0, 0.0}, schema, 0.2}));
}

// Six features (2/4/12/3/2/2 values, 25 pairs) and a 1715-member pool drawn
// from a fitted-looking model.
void climate(const fs::path &dir) {
  const FeatureSchema schema(std::vector<Feature>{
      {"gender", {"female", "male"}},
      {"age", {"16-29", "30-44", "45-59", "60+"}},
      {"region",
       {"north_east", "north_west", "yorkshire", "east_midlands", "west_midlands", "east",
        "london", "south_east", "south_west", "wales", "scotland", "northern_ireland"}},
      {"education", {"level_0_1", "level_2_3", "level_4"}},
      {"urban_rural", {"urban", "rural"}},
      {"climate_concern", {"concerned", "not_concerned"}}});
  const std::vector<std::vector<double>> shares{
      {0.51, 0.49},
      {0.24, 0.25, 0.26, 0.25},
      {0.04, 0.11, 0.08, 0.07, 0.09, 0.09, 0.13, 0.14, 0.08, 0.05, 0.09, 0.03},
      {0.35, 0.33, 0.32},
      {0.82, 0.18},
      {0.8, 0.2}};
  std::vector<double> theta{std::log(0.075)};
  const std::vector<std::vector<double>> beta{
      {1.0, 0.95},
      {0.55, 0.75, 0.9, 1.0},
      {0.85, 0.9, 0.85, 0.9, 0.85, 0.95, 0.8, 1.0, 1.0, 0.9, 0.95, 0.8},
      {0.45, 0.7, 1.0},
      {0.9, 1.0},
      {1.0, 0.35}};
  for (const auto &f : beta)
    for (double b : f)
      theta.push_back(std::log(b));
  auto rng = numerics::split_stream(1715, 0);
  std::vector<Agent> bg;
  for (int i = 0; i < 2500; ++i) {
    std::vector<std::size_t> v;
    for (const auto &s : shares)
      v.push_back(categorical(rng, s));
    bg.push_back(agent("b" + std::to_string(i), std::move(v), 0.5 + 1.5 * rng.uniform(),
                       1.0 + static_cast<double>(rng.uniform_index(4))));
  }
  const Dataset background(schema, bg, DatasetKind::background);
  ParticipationModel model{theta, schema, 0.0};
  model.qbar = mean_predicted_q(model, background);

  // Pool members are background records drawn with probability ∝ w·q.
  const auto q = predict_q(model, background);
  std::vector<double> mass;
  double total = 0.0;
  for (std::size_t i = 0; i < bg.size(); ++i)
    total += mass.emplace_back(bg[i].weight * q[i]);
  for (double &m : mass)
    m /= total;
  std::vector<Agent> pool;
  for (int i = 0; i < 1715; ++i) {
    auto a = bg[categorical(rng, mass)];
    a.id = "p" + std::to_string(i);
    a.weight = 1.0;
    a.household_size.reset();
    pool.push_back(std::move(a));
  }
  write_json(dir / "schema.json", schema_to_json(schema));
  write_csv(dir / "background.csv", background);
  write_csv(dir / "pool.csv", Dataset(schema, pool, DatasetKind::pool));
  write_json(dir / "model.json", model_to_json(model));
  std::cout << "climate fixture: mean q " << model.qbar << "\n";
}

} // namespace

int main(int argc, char **argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <data-dir>\n";
    return 2;
  }
  const fs::path root = argv[1];
  toy(root / "toy");
  estimate(root / "estimate");
  uniform(root / "uniform");
  climate(root / "climate");
  return 0;
}
