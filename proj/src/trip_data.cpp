#include "drivadv/trip_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "drivadv/errors.hpp"
#include "drivadv/io.hpp"

namespace drivadv {

namespace {

// Splits one CSV line; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool parse_finite(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void DatasetSchema::validate() const {
  std::set<std::string> seen;
  auto add = [&](const std::string& name) {
    if (name.empty()) throw InvalidConfig("schema contains an empty column name");
    if (!seen.insert(name).second)
      throw InvalidConfig("column '" + name + "' is mapped more than once");
  };
  add(trip_id_column);
  add(driver_id_column);
  for (const auto& c : env_columns) add(c);
  for (const auto& c : behavior_columns) add(c);
  for (const auto& c : performance_columns) add(c);
  if (performance_columns.empty()) throw InvalidConfig("schema has no performance columns");
  (void)metric_index();
}

std::size_t DatasetSchema::metric_index() const {
  auto it = std::find(performance_columns.begin(), performance_columns.end(), target_metric);
  if (it == performance_columns.end())
    throw InvalidConfig("target metric '" + target_metric + "' is not a performance column");
  return static_cast<std::size_t>(it - performance_columns.begin());
}

std::size_t DatasetSchema::behavior_index(const std::string& name) const {
  auto it = std::find(behavior_columns.begin(), behavior_columns.end(), name);
  if (it == behavior_columns.end()) throw UnknownDimension(name);
  return static_cast<std::size_t>(it - behavior_columns.begin());
}

std::string DatasetSchema::fingerprint() const {
  return io::hex64(io::fnv1a(to_json().dump()));
}

nlohmann::json DatasetSchema::to_json() const {
  return {{"env_columns", env_columns},
          {"behavior_columns", behavior_columns},
          {"performance_columns", performance_columns},
          {"trip_id_column", trip_id_column},
          {"driver_id_column", driver_id_column},
          {"target_metric", target_metric}};
}

DatasetSchema DatasetSchema::from_json(const nlohmann::json& j) {
  DatasetSchema s;
  try {
    s.env_columns = j.at("env_columns").get<std::vector<std::string>>();
    s.behavior_columns = j.at("behavior_columns").get<std::vector<std::string>>();
    s.performance_columns = j.at("performance_columns").get<std::vector<std::string>>();
    s.trip_id_column = j.value("trip_id_column", s.trip_id_column);
    s.driver_id_column = j.value("driver_id_column", s.driver_id_column);
    s.target_metric = j.value("target_metric", s.target_metric);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed schema: ") + e.what());
  }
  s.validate();
  return s;
}

DatasetSchema DatasetSchema::load(const std::filesystem::path& path) {
  return from_json(io::read_json(path));
}

void DatasetSchema::save(const std::filesystem::path& path) const {
  io::write_json(path, to_json());
}

Dataset::Dataset(DatasetSchema schema, std::vector<TripRecord> records,
                 std::vector<std::string> warnings)
    : schema_(std::move(schema)), records_(std::move(records)), warnings_(std::move(warnings)) {
  schema_.validate();
  if (records_.empty()) throw EmptyDataset();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.driver_id.empty())
      throw InvalidConfig("row " + std::to_string(i) + " has an empty driver id");
    if (static_cast<std::size_t>(r.env.size()) != schema_.env_dim())
      throw DimensionMismatch("env vector", schema_.env_dim(), r.env.size());
    if (static_cast<std::size_t>(r.behavior.size()) != schema_.behavior_dim())
      throw DimensionMismatch("behavior vector", schema_.behavior_dim(), r.behavior.size());
    if (static_cast<std::size_t>(r.performance.size()) != schema_.performance_dim())
      throw DimensionMismatch("performance vector", schema_.performance_dim(),
                              r.performance.size());
    if (!r.env.allFinite() || !r.behavior.allFinite() || !r.performance.allFinite())
      throw InvalidConfig("row " + std::to_string(i) + " contains a non-finite value");
    driver_index_[r.driver_id].push_back(i);
  }
}

std::vector<std::string> Dataset::driver_ids() const {
  std::vector<std::string> ids;
  ids.reserve(driver_index_.size());
  for (const auto& [id, rows] : driver_index_) ids.push_back(id);
  return ids;
}

const std::vector<std::size_t>& Dataset::driver_indices(const std::string& driver_id) const {
  auto it = driver_index_.find(driver_id);
  if (it == driver_index_.end()) throw UnknownDriver(driver_id);
  return it->second;
}

Vector Dataset::stacked(std::size_t i) const {
  const auto& r = records_.at(i);
  Vector x(r.env.size() + r.behavior.size() + r.performance.size());
  x << r.env, r.behavior, r.performance;
  return x;
}

Dataset read_dataset(std::istream& in, const DatasetSchema& schema, LoadOptions options) {
  schema.validate();
  std::string line;
  if (!std::getline(in, line)) throw EmptyDataset();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);

  std::unordered_map<std::string, std::size_t> header;
  {
    auto names = split_csv_line(line);
    for (std::size_t i = 0; i < names.size(); ++i) header.emplace(std::string(trim(names[i])), i);
  }
  auto column = [&](const std::string& name) {
    auto it = header.find(name);
    if (it == header.end()) throw MissingColumn(name);
    return it->second;
  };
  auto columns = [&](const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    for (const auto& n : names) idx.push_back(column(n));
    return idx;
  };
  const std::size_t trip_col = column(schema.trip_id_column);
  const std::size_t driver_col = column(schema.driver_id_column);
  const auto env_cols = columns(schema.env_columns);
  const auto beh_cols = columns(schema.behavior_columns);
  const auto perf_cols = columns(schema.performance_columns);

  std::vector<TripRecord> records;
  std::vector<std::string> warnings;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto fields = split_csv_line(line);
    try {
      auto field = [&](std::size_t col, const std::string& name) -> const std::string& {
        if (col >= fields.size()) throw BadValue(row, name, "");
        return fields[col];
      };
      auto fill = [&](Vector& v, const std::vector<std::size_t>& cols,
                      const std::vector<std::string>& names) {
        v.resize(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) {
          const auto& text = field(cols[k], names[k]);
          if (!parse_finite(text, v(static_cast<Eigen::Index>(k))))
            throw BadValue(row, names[k], text);
        }
      };
      TripRecord r;
      r.trip_id = std::string(trim(field(trip_col, schema.trip_id_column)));
      r.driver_id = std::string(trim(field(driver_col, schema.driver_id_column)));
      if (r.driver_id.empty()) throw BadValue(row, schema.driver_id_column, "");
      fill(r.env, env_cols, schema.env_columns);
      fill(r.behavior, beh_cols, schema.behavior_columns);
      fill(r.performance, perf_cols, schema.performance_columns);
      records.push_back(std::move(r));
    } catch (const BadValue& e) {
      if (!options.lenient) throw;
      warnings.push_back(std::string("skipped: ") + e.what());
    }
  }
  if (records.empty()) throw EmptyDataset();
  return Dataset(schema, std::move(records), std::move(warnings));
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema,
                     LoadOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return read_dataset(in, schema, options);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  const auto& s = ds.schema();
  out << quote_csv(s.trip_id_column) << ',' << quote_csv(s.driver_id_column);
  for (const auto* cols : {&s.env_columns, &s.behavior_columns, &s.performance_columns})
    for (const auto& c : *cols) out << ',' << quote_csv(c);
  out << '\n';
  for (const auto& r : ds.records()) {
    out << quote_csv(r.trip_id) << ',' << quote_csv(r.driver_id);
    for (const Vector* v : {&r.env, &r.behavior, &r.performance})
      for (Eigen::Index k = 0; k < v->size(); ++k) out << ',' << format_double((*v)(k));
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ostringstream ss;
  write_dataset(ss, ds);
  io::write_text_atomic(path, ss.str());
}

}  // namespace drivadv
