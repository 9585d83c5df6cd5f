#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drivadv/trip_data.hpp"

namespace drivadv::cmaes {

struct Bounds {
  Vector lower;
  Vector upper;
};

struct Config {
  std::size_t dim = 1;
  Vector initial_mean;
  double initial_sigma = 0.3;
  // 0 selects the default 4 + floor(3 ln n).
  std::size_t population = 0;
  int max_generations = 1000;
  // Stop when the best-so-far improves by less than this over 20 generations.
  // Non-positive disables the check.
  double target_tolerance = 1e-12;
  std::uint64_t seed = 0;
  std::optional<Bounds> bounds;
  // Stop as soon as the best fitness reaches this value.
  std::optional<double> stop_fitness;
  // One restart with doubled population after a stagnation stop.
  bool restart_on_stagnation = false;

  std::size_t effective_population() const;
  void validate() const;
};

struct Result {
  Vector best_point;
  double best_fitness = 0.0;
  int generations_used = 0;
  std::size_t evaluations = 0;
  int restarts = 0;
  // Best fitness of each generation in the caller's sign convention.
  std::vector<double> history;
  std::string stop_reason;
};

using Objective = std::function<double(const Vector&)>;
// Called once per generation with every evaluated candidate and its fitness
// (caller's sign convention).
using Observer = std::function<void(std::span<const Vector>, std::span<const double>)>;

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and rank-one +
// rank-mu covariance updates. Candidates are clamped into the bounds before
// evaluation. Throws NonFiniteObjective carrying the best point so far.
Result minimize(const Objective& objective, const Config& config, const Observer& observer = {});
Result maximize(const Objective& objective, const Config& config, const Observer& observer = {});

}  // namespace drivadv::cmaes
