#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "drivadv/cmaes.hpp"
#include "drivadv/models.hpp"
#include "drivadv/normalization.hpp"
#include "drivadv/trip_data.hpp"

namespace drivadv {

// Mean normalized behavior of one driver.
struct DriverProfile {
  std::string driver_id;
  Vector mean_behavior;
  std::size_t trip_count = 0;
};

std::vector<DriverProfile> build_profiles(const Dataset& ds, const NormalizationStats& stats);

// Observed normalized range widened by `margin` of its width on each side.
// Zero-width dimensions get +-margin.
cmaes::Bounds behavior_search_box(const Vector& observed_min, const Vector& observed_max,
                                  double margin = 0.1);

// Where the behavior search happens. An environment may already be normalized
// (fixtures) or raw.
struct EnvironmentInput {
  Vector values;
  bool normalized = false;
};

struct BehaviorSearch {
  cmaes::Bounds box;
  // Fixed normalized values for every behavior dimension; entries listed in
  // free_dims are searched, the rest stay at the template. Without a template
  // all dimensions are free.
  std::optional<Vector> template_behavior;
  std::vector<std::size_t> free_dims;

  double initial_sigma = 0.3;
  std::size_t population = 0;
  int max_generations = 500;
  double target_tolerance = 1e-9;
  std::uint64_t seed = 0;
};

struct BehaviorOptimum {
  Vector behavior;  // full normalized behavior vector
  double advantage = 0.0;
  cmaes::Result search;
  // The best Q and the best A over each generation's population were the same
  // candidate in every generation.
  bool argmax_consistent = true;
};

BehaviorOptimum optimize_behavior(const AdvantageModel& model, const EnvironmentInput& env,
                                  const BehaviorSearch& search);

struct DriverDistance {
  std::string driver_id;
  double distance = 0.0;
};

struct MatchResult {
  std::string driver_id;
  double distance = 0.0;
  std::vector<DriverDistance> ranked;  // ascending distance, ties by id
};

// Nearest profile by Euclidean distance. `invert` selects the farthest instead.
MatchResult match_driver(const std::vector<DriverProfile>& profiles, const Vector& behavior,
                         bool invert = false);

struct PlacementResult {
  Vector env_raw;
  Vector env_normalized;
  Vector optimal_behavior;      // normalized
  Vector optimal_behavior_raw;  // denormalized
  double optimal_advantage = 0.0;
  std::string matched_driver;
  double match_distance = 0.0;
  std::vector<DriverDistance> runner_ups;
  bool argmax_consistent = true;
  cmaes::Result search;

  nlohmann::json to_json(const DatasetSchema& schema) const;
};

struct PlacementOptions {
  BehaviorSearch search;
  std::size_t runner_ups = 5;
  bool invert_match = false;
};

PlacementResult place(const AdvantageModel& model, const std::vector<DriverProfile>& profiles,
                      const EnvironmentInput& env, const PlacementOptions& options);

}  // namespace drivadv
