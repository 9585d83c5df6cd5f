#include "drivadv/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <map>

#include "drivadv/errors.hpp"

namespace drivadv {

namespace {

std::string fixed6(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<TripAdvantage> trip_advantages(const Dataset& ds, const BaselineModel& model,
                                           std::size_t metric_index, AdvantageUnits units) {
  if (ds.size() == 0) throw EmptyDataset();
  const auto& stats = *model.stats();
  if (metric_index >= stats.layout().performance_dim)
    throw DimensionMismatch("metric index", stats.layout().performance_dim, metric_index);
  const double scale = units == AdvantageUnits::kRaw ? stats.performance_std(metric_index) : 1.0;
  const auto m = static_cast<Eigen::Index>(metric_index);

  std::vector<TripAdvantage> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records()) {
    const double q = stats.normalize_performance(r.performance)(m);
    const double v = model.value(r.env)(m);
    out.push_back({r.trip_id, r.driver_id, (q - v) * scale});
  }
  return out;
}

Ranking assess_drivers(const std::vector<TripAdvantage>& advantages, std::size_t min_trips) {
  if (advantages.empty()) throw EmptyDataset();
  std::map<std::string, std::vector<double>> groups;
  for (const auto& t : advantages) groups[t.driver_id].push_back(t.advantage);

  Ranking ranking;
  for (auto& [id, values] : groups) {
    // Sort so the sums do not depend on input row order.
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double n = static_cast<double>(values.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    ranking.entries.push_back({id, mean, sd, values.size()});
    if (values.size() < min_trips)
      ranking.warnings.push_back("driver '" + id + "' has only " + std::to_string(values.size()) +
                                 " trips (< " + std::to_string(min_trips) + ")");
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(),
            [](const DriverAssessment& a, const DriverAssessment& b) {
              if (a.mean_advantage != b.mean_advantage) return a.mean_advantage > b.mean_advantage;
              return a.driver_id < b.driver_id;
            });
  return ranking;
}

std::string render_ranking(const Ranking& ranking) {
  std::string out = "# rank  driver_id  mean_advantage (std)  trips\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    out += std::to_string(i + 1) + "  " + e.driver_id + "  " + fixed6(e.mean_advantage) + " (" +
           fixed6(e.std_advantage) + ")  n=" + std::to_string(e.trip_count) + "\n";
  }
  return out;
}

std::string ranking_csv(const Ranking& ranking) {
  std::string out = "rank,driver_id,mean_advantage,std_advantage,trip_count\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    out += std::to_string(i + 1) + "," + e.driver_id + "," + format_double(e.mean_advantage) + "," +
           format_double(e.std_advantage) + "," + std::to_string(e.trip_count) + "\n";
  }
  return out;
}

}  // namespace drivadv
