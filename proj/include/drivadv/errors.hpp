#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drivadv {

// Errors split into two families so frontends can map them onto exit codes:
// ConfigError for bad input/usage, RuntimeFailure for numeric trouble.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ConfigError {
 public:
  DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
      : ConfigError(what + ": expected dimension " + std::to_string(expected) + ", got " +
                    std::to_string(got)) {}
};

class MissingColumn : public ConfigError {
 public:
  explicit MissingColumn(const std::string& name)
      : ConfigError("missing column '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class BadValue : public ConfigError {
 public:
  BadValue(std::size_t row, const std::string& column, const std::string& text)
      : ConfigError("bad value '" + text + "' at row " + std::to_string(row) + ", column '" +
                    column + "'"),
        row_(row),
        column_(column) {}
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class EmptyDataset : public ConfigError {
 public:
  EmptyDataset() : ConfigError("dataset has no valid rows") {}
};

class UnknownDriver : public ConfigError {
 public:
  explicit UnknownDriver(const std::string& id) : ConfigError("unknown driver '" + id + "'") {}
};

class UnknownDimension : public ConfigError {
 public:
  explicit UnknownDimension(const std::string& name)
      : ConfigError("unknown behavior dimension '" + name + "'") {}
};

class TooFewSamples : public ConfigError {
 public:
  TooFewSamples(std::size_t need, std::size_t got)
      : ConfigError("need at least " + std::to_string(need) + " samples, got " +
                    std::to_string(got)) {}
};

class InvalidConfig : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class EmptyProfiles : public ConfigError {
 public:
  EmptyProfiles() : ConfigError("no driver profiles to match against") {}
};

class NonFiniteLoss : public RuntimeFailure {
 public:
  explicit NonFiniteLoss(int epoch)
      : RuntimeFailure("non-finite training loss in epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Carries the best point found before the objective returned NaN/Inf.
class NonFiniteObjective : public RuntimeFailure {
 public:
  NonFiniteObjective(std::vector<double> best_point, double best_fitness)
      : RuntimeFailure("objective returned a non-finite value"),
        best_point_(std::move(best_point)),
        best_fitness_(best_fitness) {}
  const std::vector<double>& best_point() const { return best_point_; }
  double best_fitness() const { return best_fitness_; }

 private:
  std::vector<double> best_point_;
  double best_fitness_;
};

}  // namespace drivadv
