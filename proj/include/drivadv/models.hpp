#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include "drivadv/neural.hpp"
#include "drivadv/normalization.hpp"
#include "drivadv/trip_data.hpp"

namespace drivadv {

// Hyperparameters shared by the baseline and behavior networks.
struct ModelHyper {
  std::vector<std::size_t> hidden_widths = {64, 64, 64};
  int epochs = 100;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t baseline_seed = 1;
  std::uint64_t behavior_seed = 2;
  double validation_fraction = 0.0;

  TrainOptions train_options(std::uint64_t seed) const;
  nlohmann::json to_json() const;
  static ModelHyper from_json(const nlohmann::json& j);
};

using StatsPtr = std::shared_ptr<const NormalizationStats>;

// Environment-only regressor V(s): normalized s -> normalized q.
class BaselineModel {
 public:
  BaselineModel(Mlp net, StatsPtr stats);

  Vector value(const Vector& env_raw) const;
  Vector value_normalized(const Vector& env) const;

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  const StatsPtr& stats() const { return stats_; }

 private:
  Mlp net_;
  StatsPtr stats_;
};

// Environment + behavior regressor Q(s, a): normalized [s; a] -> normalized q.
class BehaviorModel {
 public:
  BehaviorModel(Mlp net, StatsPtr stats);

  Vector value(const Vector& env_raw, const Vector& behavior_raw) const;
  Vector value_normalized(const Vector& env, const Vector& behavior) const;

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  const StatsPtr& stats() const { return stats_; }

 private:
  Mlp net_;
  StatsPtr stats_;
};

// A(s, a) = Q(s, a) - V(s) on one performance dimension. The environment
// feeds both networks; the behavior only feeds Q.
class AdvantageModel {
 public:
  struct Breakdown {
    double behavior_value;
    double baseline_value;
    double advantage;
  };

  // Throws InvalidConfig when the sub-models were normalized differently.
  AdvantageModel(BaselineModel baseline, BehaviorModel behavior, std::size_t metric_index);

  // Normalized target-metric units.
  double advantage(const Vector& env_raw, const Vector& behavior_raw) const;
  double advantage_normalized(const Vector& env, const Vector& behavior) const;
  Breakdown evaluate_normalized(const Vector& env, const Vector& behavior) const;

  const BaselineModel& baseline() const { return baseline_; }
  BaselineModel& baseline() { return baseline_; }
  const BehaviorModel& behavior() const { return behavior_; }
  BehaviorModel& behavior() { return behavior_; }
  const NormalizationStats& stats() const { return *baseline_.stats(); }
  std::size_t metric_index() const { return metric_index_; }

 private:
  BaselineModel baseline_;
  BehaviorModel behavior_;
  std::size_t metric_index_;
};

Matrix normalized_env_matrix(const Dataset& ds, const NormalizationStats& stats);
Matrix normalized_env_behavior_matrix(const Dataset& ds, const NormalizationStats& stats);
Matrix normalized_performance_matrix(const Dataset& ds, const NormalizationStats& stats);

std::pair<BaselineModel, TrainReport> train_baseline(const Dataset& ds, StatsPtr stats,
                                                     const ModelHyper& hyper);
std::pair<BehaviorModel, TrainReport> train_behavior(const Dataset& ds, StatsPtr stats,
                                                     const ModelHyper& hyper);

// Everything needed to evaluate and search a trained advantage model.
// On disk: baseline.json, behavior.json, stats.json, meta.json.
struct ModelBundle {
  AdvantageModel model;
  DatasetSchema schema;
  ModelHyper hyper;
  TrainReport baseline_report;
  TrainReport behavior_report;
  // Observed per-dimension range of normalized training behaviors.
  Vector behavior_min;
  Vector behavior_max;

  void save(const std::filesystem::path& dir) const;
  static ModelBundle load(const std::filesystem::path& dir);
};

// Fits stats, trains both networks and records the behavior range.
ModelBundle train_bundle(const Dataset& ds, const ModelHyper& hyper);

}  // namespace drivadv
