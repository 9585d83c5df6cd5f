#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "drivadv/models.hpp"
#include "drivadv/trip_data.hpp"

namespace drivadv {

enum class AdvantageUnits { kNormalized, kRaw };

// p_i = q_i - V(s_i) on the target metric.
struct TripAdvantage {
  std::string trip_id;
  std::string driver_id;
  double advantage = 0.0;
};

struct DriverAssessment {
  std::string driver_id;
  double mean_advantage = 0.0;
  double std_advantage = 0.0;  // sample std, 0 for a single trip
  std::size_t trip_count = 0;
};

struct Ranking {
  // Sorted by mean advantage descending, ties by driver id ascending.
  std::vector<DriverAssessment> entries;
  // Drivers with fewer trips than the configured threshold.
  std::vector<std::string> warnings;
};

std::vector<TripAdvantage> trip_advantages(const Dataset& ds, const BaselineModel& model,
                                           std::size_t metric_index,
                                           AdvantageUnits units = AdvantageUnits::kNormalized);

Ranking assess_drivers(const std::vector<TripAdvantage>& advantages, std::size_t min_trips = 10);

// Plain text: header, then "rank  driver  mean (std)  n=count" per driver.
std::string render_ranking(const Ranking& ranking);
std::string ranking_csv(const Ranking& ranking);

}  // namespace drivadv
