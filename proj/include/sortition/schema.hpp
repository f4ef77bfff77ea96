#pragma once
// Feature schema, agent records, CSV ingestion and population statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sortition/error.hpp"

namespace sortition {

struct Feature {
  std::string name;
  std::vector<std::string> values;

  bool operator==(const Feature &) const = default;
};

/// The feature-value universe. Feature-value pairs are numbered globally in
/// feature order, then value order; every vector indexed "per pair" in this
/// library uses that numbering.
class FeatureSchema {
public:
  FeatureSchema() = default;

  explicit FeatureSchema(std::vector<Feature> features)
      : features_(std::move(features)) {
    std::unordered_set<std::string> names;
    offsets_.reserve(features_.size() + 1);
    offsets_.push_back(0);
    for (const auto &f : features_) {
      if (f.name.empty())
        throw Error(ErrorKind::InvalidSchema, "feature with empty name");
      if (!names.insert(f.name).second)
        throw Error(ErrorKind::InvalidSchema, "duplicate feature " + f.name);
      if (f.values.size() < 2)
        throw Error(ErrorKind::InvalidSchema,
                    "feature " + f.name + " needs at least two values");
      std::unordered_set<std::string> seen;
      for (const auto &v : f.values)
        if (!seen.insert(v).second)
          throw Error(ErrorKind::InvalidSchema,
                      "duplicate value " + v + " in feature " + f.name);
      offsets_.push_back(offsets_.back() + f.values.size());
    }
  }

  std::size_t num_features() const { return features_.size(); }
  std::size_t num_pairs() const { return offsets_.empty() ? 0 : offsets_.back(); }
  const std::vector<Feature> &features() const { return features_; }
  const Feature &feature(std::size_t f) const { return features_.at(f); }

  std::size_t pair_index(std::size_t f, std::size_t v) const {
    return offsets_[f] + v;
  }
  std::size_t pair_feature(std::size_t pair) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), pair);
    return static_cast<std::size_t>(it - offsets_.begin()) - 1;
  }
  std::size_t pair_value(std::size_t pair) const {
    return pair - offsets_[pair_feature(pair)];
  }
  std::string pair_label(std::size_t pair) const {
    const auto f = pair_feature(pair);
    return features_[f].name + "=" + features_[f].values[pair - offsets_[f]];
  }

  std::optional<std::size_t> find_feature(std::string_view name) const {
    for (std::size_t f = 0; f < features_.size(); ++f)
      if (features_[f].name == name)
        return f;
    return std::nullopt;
  }
  std::optional<std::size_t> find_value(std::size_t f,
                                        std::string_view value) const {
    const auto &vals = features_.at(f).values;
    for (std::size_t v = 0; v < vals.size(); ++v)
      if (vals[v] == value)
        return v;
    return std::nullopt;
  }

  bool operator==(const FeatureSchema &other) const {
    return features_ == other.features_;
  }

  /// Stable 64-bit FNV-1a fingerprint of the schema content, rendered as hex.
  std::string fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
      }
      h ^= 0xff;
      h *= 1099511628211ULL;
    };
    for (const auto &f : features_) {
      mix(f.name);
      for (const auto &v : f.values)
        mix(v);
      mix("|");
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
  }

private:
  std::vector<Feature> features_;
  std::vector<std::size_t> offsets_;
};

inline FeatureSchema schema_from_json(const nlohmann::json &doc) {
  if (!doc.is_object() || !doc.contains("features") ||
      !doc["features"].is_array())
    throw Error(ErrorKind::InvalidSchema, "expected {\"features\": [...]}");
  std::vector<Feature> features;
  for (const auto &f : doc["features"]) {
    if (!f.contains("name") || !f.contains("values"))
      throw Error(ErrorKind::InvalidSchema,
                  "each feature needs \"name\" and \"values\"");
    features.push_back(
        {f["name"].get<std::string>(), f["values"].get<std::vector<std::string>>()});
  }
  return FeatureSchema(std::move(features));
}

inline nlohmann::json schema_to_json(const FeatureSchema &schema) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto &f : schema.features())
    features.push_back({{"name", f.name}, {"values", f.values}});
  return {{"features", features}};
}

inline FeatureSchema load_schema(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::Io, "cannot open schema " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::InvalidSchema, path + ": " + e.what());
  }
  return schema_from_json(doc);
}

/// One individual. `values[f]` indexes into the value list of feature f.
struct Agent {
  std::string id;
  std::vector<std::size_t> values;
  double weight = 1.0;
  std::optional<double> household_size;
};

enum class DatasetKind { pool, background, population };

class Dataset {
public:
  Dataset() = default;
  Dataset(FeatureSchema schema, std::vector<Agent> agents, DatasetKind kind)
      : schema_(std::move(schema)), agents_(std::move(agents)), kind_(kind) {
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      const auto &a = agents_[i];
      if (a.values.size() != schema_.num_features())
        throw Error(ErrorKind::SchemaMismatch,
                    "agent " + a.id + " has wrong number of features");
      for (std::size_t f = 0; f < a.values.size(); ++f)
        if (a.values[f] >= schema_.feature(f).values.size())
          throw Error(ErrorKind::UnknownValue,
                      "agent " + a.id + " value index out of range");
      if (!(a.weight > 0.0) || !std::isfinite(a.weight))
        throw Error(ErrorKind::NonpositiveWeight,
                    "agent " + a.id + " has weight " + std::to_string(a.weight));
      if (kind_ == DatasetKind::pool && a.weight != 1.0)
        throw Error(ErrorKind::NonpositiveWeight,
                    "pool agent " + a.id + " must have weight 1");
    }
  }

  const FeatureSchema &schema() const { return schema_; }
  const std::vector<Agent> &agents() const { return agents_; }
  const Agent &agent(std::size_t i) const { return agents_[i]; }
  DatasetKind kind() const { return kind_; }
  std::size_t size() const { return agents_.size(); }
  bool empty() const { return agents_.empty(); }

  std::size_t pair_of(std::size_t agent, std::size_t feature) const {
    return schema_.pair_index(feature, agents_[agent].values[feature]);
  }

  double total_weight() const {
    double s = 0.0;
    for (const auto &a : agents_)
      s += a.weight;
    return s;
  }

private:
  FeatureSchema schema_;
  std::vector<Agent> agents_;
  DatasetKind kind_ = DatasetKind::pool;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto *ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

/// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::string csv_escape(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

} // namespace detail

/// Parses `id,<features...>[,weight][,household_size]`. Columns are matched by
/// header name; unrecognised extra columns are ignored.
inline Dataset parse_dataset(std::istream &in, const FeatureSchema &schema,
                             DatasetKind kind) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorKind::MissingColumn, "empty CSV, no header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF)
    line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c)
    col.emplace(header[c], c);

  auto require = [&](const std::string &name) {
    auto it = col.find(name);
    if (it == col.end())
      throw Error(ErrorKind::MissingColumn, "column '" + name + "' not found");
    return it->second;
  };
  const std::size_t id_col = require("id");
  std::vector<std::size_t> feature_cols;
  for (const auto &f : schema.features())
    feature_cols.push_back(require(f.name));
  std::optional<std::size_t> weight_col, household_col;
  if (auto it = col.find("weight"); it != col.end())
    weight_col = it->second;
  if (auto it = col.find("household_size"); it != col.end())
    household_col = it->second;

  std::vector<Agent> agents;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty())
      continue;
    const auto cells = detail::split_csv_line(line);
    auto cell = [&](std::size_t c) -> const std::string & {
      if (c >= cells.size())
        throw Error(ErrorKind::MissingColumn,
                    "row " + std::to_string(row) + " has too few columns");
      return cells[c];
    };
    Agent a;
    a.id = cell(id_col);
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const auto &value = cell(feature_cols[f]);
      auto v = schema.find_value(f, value);
      if (!v)
        throw Error(ErrorKind::UnknownValue,
                    "row " + std::to_string(row) + ", feature '" +
                        schema.feature(f).name + "', value '" + value + "'");
      a.values.push_back(*v);
    }
    auto parse_number = [&](std::size_t c, const char *what) {
      const auto &s = cell(c);
      try {
        std::size_t used = 0;
        double x = std::stod(s, &used);
        if (used != s.size())
          throw std::invalid_argument(s);
        return x;
      } catch (const std::exception &) {
        throw Error(ErrorKind::InvalidArgument, "row " + std::to_string(row) +
                                                    ": bad " + what + " '" + s +
                                                    "'");
      }
    };
    if (weight_col) {
      a.weight = parse_number(*weight_col, "weight");
      if (!(a.weight > 0.0))
        throw Error(ErrorKind::NonpositiveWeight,
                    "row " + std::to_string(row) + " weight " + cell(*weight_col));
    }
    if (household_col && !cell(*household_col).empty())
      a.household_size = parse_number(*household_col, "household_size");
    agents.push_back(std::move(a));
  }
  return Dataset(schema, std::move(agents), kind);
}

inline Dataset load_dataset(const std::string &path, const FeatureSchema &schema,
                            DatasetKind kind) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::Io, "cannot open " + path);
  return parse_dataset(in, schema, kind);
}

inline void write_dataset(std::ostream &out, const Dataset &data) {
  const auto &schema = data.schema();
  const bool weighted = data.kind() != DatasetKind::pool;
  const bool households = std::any_of(
      data.agents().begin(), data.agents().end(),
      [](const Agent &a) { return a.household_size.has_value(); });
  out << "id";
  for (const auto &f : schema.features())
    out << ',' << detail::csv_escape(f.name);
  if (weighted)
    out << ",weight";
  if (households)
    out << ",household_size";
  out << '\n';
  std::ostringstream num;
  num.precision(17);
  for (const auto &a : data.agents()) {
    out << detail::csv_escape(a.id);
    for (std::size_t f = 0; f < a.values.size(); ++f)
      out << ',' << detail::csv_escape(schema.feature(f).values[a.values[f]]);
    if (weighted) {
      num.str("");
      num << a.weight;
      out << ',' << num.str();
    }
    if (households) {
      out << ',';
      if (a.household_size) {
        num.str("");
        num << *a.household_size;
        out << num.str();
      }
    }
    out << '\n';
  }
}

/// Population size plus (possibly fractional) per-pair counts n_{f,v}.
struct PopulationStats {
  std::uint64_t n = 0;
  std::vector<double> counts;

  double share(std::size_t pair) const {
    return counts[pair] / static_cast<double>(n);
  }
};

inline PopulationStats population_stats_from_background(const Dataset &background,
                                                         std::uint64_t n) {
  if (background.empty())
    throw Error(ErrorKind::EmptyDataset, "background sample is empty");
  if (n == 0)
    throw Error(ErrorKind::InvalidArgument, "population size must be positive");
  const double total = background.total_weight();
  if (!(total > 0.0))
    throw Error(ErrorKind::EmptyDataset, "background has zero total weight");
  const auto &schema = background.schema();
  std::vector<double> mass(schema.num_pairs(), 0.0);
  for (std::size_t i = 0; i < background.size(); ++i)
    for (std::size_t f = 0; f < schema.num_features(); ++f)
      mass[background.pair_of(i, f)] += background.agent(i).weight;
  PopulationStats stats{n, std::vector<double>(schema.num_pairs())};
  for (std::size_t p = 0; p < mass.size(); ++p)
    stats.counts[p] = static_cast<double>(n) * (mass[p] / total);
  return stats;
}

} // namespace sortition
