#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace drivadv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One trip split into identifier, environment (s), behavior (a) and
// performance (q) parts.
struct TripRecord {
  std::string trip_id;
  std::string driver_id;
  Vector env;
  Vector behavior;
  Vector performance;
};

// Maps CSV columns onto the s/a/q blocks of a trip.
struct DatasetSchema {
  std::vector<std::string> env_columns;
  std::vector<std::string> behavior_columns;
  std::vector<std::string> performance_columns;
  std::string trip_id_column = "trip_id";
  std::string driver_id_column = "driver_id";
  std::string target_metric = "total_mpg";

  // Throws InvalidConfig on overlapping columns or an unknown target metric.
  void validate() const;

  std::size_t env_dim() const { return env_columns.size(); }
  std::size_t behavior_dim() const { return behavior_columns.size(); }
  std::size_t performance_dim() const { return performance_columns.size(); }
  std::size_t metric_index() const;
  // Index of a named behavior column; throws UnknownDimension.
  std::size_t behavior_index(const std::string& name) const;

  // Stable hash of the column layout, used to catch bundles applied to the
  // wrong data.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static DatasetSchema from_json(const nlohmann::json& j);
  static DatasetSchema load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const DatasetSchema&) const = default;
};

class Dataset {
 public:
  using DriverIndex = std::map<std::string, std::vector<std::size_t>>;

  Dataset(DatasetSchema schema, std::vector<TripRecord> records,
          std::vector<std::string> warnings = {});

  const DatasetSchema& schema() const { return schema_; }
  const std::vector<TripRecord>& records() const { return records_; }
  const TripRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }

  const DriverIndex& driver_index() const { return driver_index_; }
  std::vector<std::string> driver_ids() const;
  // Row indices belonging to one driver; throws UnknownDriver.
  const std::vector<std::size_t>& driver_indices(const std::string& driver_id) const;

  // Non-fatal ingestion messages (skipped rows in lenient mode).
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Stacked [s; a; q] of row i.
  Vector stacked(std::size_t i) const;

 private:
  DatasetSchema schema_;
  std::vector<TripRecord> records_;
  DriverIndex driver_index_;
  std::vector<std::string> warnings_;
};

struct LoadOptions {
  // Skip rows with unparsable or non-finite values instead of failing.
  bool lenient = false;
};

Dataset read_dataset(std::istream& in, const DatasetSchema& schema, LoadOptions options = {});
Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema,
                     LoadOptions options = {});

// Writes the dataset as CSV with shortest round-trip number formatting, so
// reloading reproduces every value bitwise.
void write_dataset(std::ostream& out, const Dataset& ds);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace drivadv
