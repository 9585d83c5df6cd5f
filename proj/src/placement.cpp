#include "drivadv/placement.hpp"

#include <algorithm>
#include <cmath>

#include "drivadv/errors.hpp"

namespace drivadv {

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::vector<DriverProfile> build_profiles(const Dataset& ds, const NormalizationStats& stats) {
  if (ds.size() == 0) throw EmptyDataset();
  std::vector<DriverProfile> out;
  for (const auto& [id, rows] : ds.driver_index()) {
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(stats.layout().behavior_dim));
    for (auto i : rows) sum += stats.normalize_behavior(ds[i].behavior);
    out.push_back({id, sum / static_cast<double>(rows.size()), rows.size()});
  }
  return out;
}

cmaes::Bounds behavior_search_box(const Vector& observed_min, const Vector& observed_max,
                                  double margin) {
  if (observed_min.size() != observed_max.size())
    throw DimensionMismatch("behavior range", observed_min.size(), observed_max.size());
  cmaes::Bounds box{observed_min, observed_max};
  for (Eigen::Index d = 0; d < observed_min.size(); ++d) {
    const double width = observed_max(d) - observed_min(d);
    if (width < 0.0) throw InvalidConfig("behavior range has min > max");
    const double pad = width > 0.0 ? margin * width : margin;
    box.lower(d) -= pad;
    box.upper(d) += pad;
  }
  return box;
}

BehaviorOptimum optimize_behavior(const AdvantageModel& model, const EnvironmentInput& env,
                                  const BehaviorSearch& search) {
  const auto& stats = model.stats();
  const std::size_t dim = stats.layout().behavior_dim;
  const Vector s = env.normalized ? env.values : stats.normalize_env(env.values);
  if (static_cast<std::size_t>(s.size()) != stats.layout().env_dim)
    throw DimensionMismatch("env vector", stats.layout().env_dim, s.size());
  if (static_cast<std::size_t>(search.box.lower.size()) != dim ||
      static_cast<std::size_t>(search.box.upper.size()) != dim)
    throw DimensionMismatch("behavior search box", dim, search.box.lower.size());

  Vector base = Vector::Zero(static_cast<Eigen::Index>(dim));
  std::vector<std::size_t> free_dims;
  if (search.template_behavior) {
    if (static_cast<std::size_t>(search.template_behavior->size()) != dim)
      throw DimensionMismatch("behavior template", dim, search.template_behavior->size());
    if (search.free_dims.empty()) throw InvalidConfig("a behavior template needs free dimensions");
    base = *search.template_behavior;
    free_dims = search.free_dims;
    for (auto d : free_dims)
      if (d >= dim) throw DimensionMismatch("free behavior dimension", dim, d);
  } else {
    for (std::size_t d = 0; d < dim; ++d) free_dims.push_back(d);
  }
  if (!base.allFinite()) {
    Vector check = base;
    for (auto d : free_dims) check(static_cast<Eigen::Index>(d)) = 0.0;
    if (!check.allFinite()) throw InvalidConfig("behavior template has non-finite fixed values");
  }

  const auto k = static_cast<Eigen::Index>(free_dims.size());
  cmaes::Config cfg;
  cfg.dim = free_dims.size();
  cfg.bounds = cmaes::Bounds{Vector(k), Vector(k)};
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto d = static_cast<Eigen::Index>(free_dims[static_cast<std::size_t>(i)]);
    cfg.bounds->lower(i) = search.box.lower(d);
    cfg.bounds->upper(i) = search.box.upper(d);
  }
  cfg.initial_mean = Vector::Zero(k).cwiseMax(cfg.bounds->lower).cwiseMin(cfg.bounds->upper);
  cfg.initial_sigma = search.initial_sigma;
  cfg.population = search.population;
  cfg.max_generations = search.max_generations;
  cfg.target_tolerance = search.target_tolerance;
  cfg.seed = search.seed;

  auto assemble = [&](const Vector& x) {
    Vector a = base;
    for (Eigen::Index i = 0; i < k; ++i) a(static_cast<Eigen::Index>(free_dims[static_cast<std::size_t>(i)])) = x(i);
    return a;
  };

  // Q values of the current generation, in evaluation order.
  std::vector<double> generation_q;
  auto objective = [&](const Vector& x) {
    const auto b = model.evaluate_normalized(s, assemble(x));
    generation_q.push_back(b.behavior_value);
    return b.advantage;
  };
  bool consistent = true;
  auto observer = [&](std::span<const Vector>, std::span<const double> advantages) {
    const auto best_a = std::max_element(advantages.begin(), advantages.end()) - advantages.begin();
    const auto best_q = std::max_element(generation_q.begin(), generation_q.end()) - generation_q.begin();
    if (best_a != best_q) consistent = false;
    generation_q.clear();
  };

  BehaviorOptimum out;
  out.search = cmaes::maximize(objective, cfg, observer);
  out.behavior = assemble(out.search.best_point);
  out.advantage = out.search.best_fitness;
  out.argmax_consistent = consistent;
  return out;
}

MatchResult match_driver(const std::vector<DriverProfile>& profiles, const Vector& behavior,
                         bool invert) {
  if (profiles.empty()) throw EmptyProfiles();
  MatchResult out;
  for (const auto& p : profiles) {
    if (p.mean_behavior.size() != behavior.size())
      throw DimensionMismatch("driver profile", behavior.size(), p.mean_behavior.size());
    out.ranked.push_back({p.driver_id, (p.mean_behavior - behavior).norm()});
  }
  std::sort(out.ranked.begin(), out.ranked.end(), [invert](const DriverDistance& a, const DriverDistance& b) {
    if (a.distance != b.distance) return invert ? a.distance > b.distance : a.distance < b.distance;
    return a.driver_id < b.driver_id;
  });
  out.driver_id = out.ranked.front().driver_id;
  out.distance = out.ranked.front().distance;
  return out;
}

PlacementResult place(const AdvantageModel& model, const std::vector<DriverProfile>& profiles,
                      const EnvironmentInput& env, const PlacementOptions& options) {
  if (profiles.empty()) throw EmptyProfiles();
  const auto& stats = model.stats();
  auto optimum = optimize_behavior(model, env, options.search);
  auto match = match_driver(profiles, optimum.behavior, options.invert_match);

  PlacementResult r;
  if (env.normalized) {
    r.env_normalized = env.values;
    r.env_raw = stats.denormalize_env(env.values);
  } else {
    r.env_raw = env.values;
    r.env_normalized = stats.normalize_env(env.values);
  }
  r.optimal_behavior = optimum.behavior;
  r.optimal_behavior_raw = stats.denormalize_behavior(optimum.behavior);
  r.optimal_advantage = optimum.advantage;
  r.matched_driver = match.driver_id;
  r.match_distance = match.distance;
  for (std::size_t i = 1; i < match.ranked.size() && i <= options.runner_ups; ++i)
    r.runner_ups.push_back(match.ranked[i]);
  r.argmax_consistent = optimum.argmax_consistent;
  r.search = std::move(optimum.search);
  return r;
}

nlohmann::json PlacementResult::to_json(const DatasetSchema& schema) const {
  std::vector<double> rounded(static_cast<std::size_t>(optimal_behavior_raw.size()));
  for (Eigen::Index i = 0; i < optimal_behavior_raw.size(); ++i)
    rounded[static_cast<std::size_t>(i)] = std::round(optimal_behavior_raw(i));
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& d : runner_ups) ranked.push_back({{"driver_id", d.driver_id}, {"distance", d.distance}});
  return {{"env", {{"raw", to_std(env_raw)}, {"normalized", to_std(env_normalized)}}},
          {"behavior_columns", schema.behavior_columns},
          {"optimal_behavior",
           {{"normalized", to_std(optimal_behavior)},
            {"raw", to_std(optimal_behavior_raw)},
            {"raw_rounded", rounded}}},
          {"optimal_advantage", optimal_advantage},
          {"target_metric", schema.target_metric},
          {"matched_driver", matched_driver},
          {"match_distance", match_distance},
          {"runner_ups", std::move(ranked)},
          {"argmax_consistent", argmax_consistent},
          {"search",
           {{"generations", search.generations_used},
            {"evaluations", search.evaluations},
            {"stop_reason", search.stop_reason}}}};
}

}  // namespace drivadv
