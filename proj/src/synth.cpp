#include "drivadv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "drivadv/errors.hpp"
#include "drivadv/io.hpp"

namespace drivadv::synth {

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string padded(const char* prefix, std::size_t i, std::size_t count) {
  int width = 1;
  for (std::size_t c = count - 1; c >= 10; c /= 10) ++width;
  width = std::max(width, 2);
  std::string digits = std::to_string(i);
  if (digits.size() < static_cast<std::size_t>(width))
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double normal() { return normal_(rng_); }

  Vector normal_vector(std::size_t n, double sigma = 1.0) {
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = sigma * normal();
    return v;
  }

  Vector unit_vector(std::size_t n) {
    Vector v = normal_vector(n);
    while (v.norm() < 1e-12) v = normal_vector(n);
    return v.normalized();
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace

void SynthConfig::validate() const {
  if (n_drivers < 2) throw InvalidConfig("need ≥ 2 drivers");
  if (trips_per_driver < 1) throw InvalidConfig("need >= 1 trip per driver");
  if (d_env < 1 || d_behavior < 1) throw InvalidConfig("env and behavior dimensions must be positive");
  if (!(skill_spacing > 0.0)) throw InvalidConfig("skill spacing must be positive");
  if (!(noise_sigma >= 0.0)) throw InvalidConfig("noise sigma must be non-negative");
  if (!(behavior_gain > 0.0)) throw InvalidConfig("behavior gain must be positive");
  if (!(center_radius > 0.0) || !(behavior_noise >= 0.0) || !(env_shift >= 0.0))
    throw InvalidConfig("center radius, behavior noise and env shift must be valid magnitudes");
  if (behavior_names.size() > d_behavior)
    throw InvalidConfig("more behavior names than behavior dimensions");
}

double GroundTruth::env_effect(const Vector& s) const {
  Vector hidden = (f_weights * s + f_bias).array().tanh().matrix();
  return f_output.dot(hidden) - difficulty_slope * difficulty_direction.dot(s);
}

double GroundTruth::behavior_effect(const Vector& a) const {
  return -behavior_gain * (a - optimum_behavior).squaredNorm();
}

Vector GroundTruth::expected_performance(const Vector& s, const Vector& a, std::size_t driver) const {
  const double f = env_effect(s);
  const double g = behavior_effect(a);
  Vector q(2);
  q(0) = mpg_base + f + g + driver_skills(static_cast<Eigen::Index>(driver)) + interaction * f * g;
  q(1) = 5.0 + hours_slope * hours_direction.dot(s) - 0.2 * g;
  return q;
}

std::size_t GroundTruth::driver_position(const std::string& id) const {
  auto it = std::find(driver_ids.begin(), driver_ids.end(), id);
  if (it == driver_ids.end()) throw UnknownDriver(id);
  return static_cast<std::size_t>(it - driver_ids.begin());
}

nlohmann::json GroundTruth::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < f_weights.rows(); ++r) rows.push_back(to_std(f_weights.row(r).transpose()));
  nlohmann::json drivers = nlohmann::json::array();
  for (std::size_t k = 0; k < driver_ids.size(); ++k)
    drivers.push_back({{"driver_id", driver_ids[k]},
                       {"skill", driver_skills(static_cast<Eigen::Index>(k))},
                       {"behavior_center", to_std(driver_behavior_centers[k])},
                       {"env_shifted", static_cast<bool>(driver_env_shifted[k])}});
  return {{"env_effect",
           {{"weights", std::move(rows)},
            {"bias", to_std(f_bias)},
            {"output", to_std(f_output)},
            {"difficulty_direction", to_std(difficulty_direction)},
            {"difficulty_slope", difficulty_slope}}},
          {"hours", {{"direction", to_std(hours_direction)}, {"slope", hours_slope}}},
          {"mpg_base", mpg_base},
          {"behavior_gain", behavior_gain},
          {"interaction", interaction},
          {"env_shift", env_shift},
          {"optimum_behavior", to_std(optimum_behavior)},
          {"optimum_driver", optimum_driver},
          {"drivers", std::move(drivers)}};
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
  try {
    GroundTruth t;
    const auto& f = j.at("env_effect");
    auto rows = f.at("weights").get<std::vector<std::vector<double>>>();
    const auto cols = rows.empty() ? 0 : rows.front().size();
    t.f_weights.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r)
      t.f_weights.row(static_cast<Eigen::Index>(r)) = from_std(rows[r]).transpose();
    t.f_bias = from_std(f.at("bias").get<std::vector<double>>());
    t.f_output = from_std(f.at("output").get<std::vector<double>>());
    t.difficulty_direction = from_std(f.at("difficulty_direction").get<std::vector<double>>());
    t.difficulty_slope = f.at("difficulty_slope").get<double>();
    t.hours_direction = from_std(j.at("hours").at("direction").get<std::vector<double>>());
    t.hours_slope = j.at("hours").at("slope").get<double>();
    t.mpg_base = j.at("mpg_base").get<double>();
    t.behavior_gain = j.at("behavior_gain").get<double>();
    t.interaction = j.at("interaction").get<double>();
    t.env_shift = j.at("env_shift").get<double>();
    t.optimum_behavior = from_std(j.at("optimum_behavior").get<std::vector<double>>());
    t.optimum_driver = j.at("optimum_driver").get<std::string>();
    const auto& drivers = j.at("drivers");
    t.driver_skills.resize(static_cast<Eigen::Index>(drivers.size()));
    for (std::size_t k = 0; k < drivers.size(); ++k) {
      t.driver_ids.push_back(drivers[k].at("driver_id").get<std::string>());
      t.driver_skills(static_cast<Eigen::Index>(k)) = drivers[k].at("skill").get<double>();
      t.driver_behavior_centers.push_back(from_std(drivers[k].at("behavior_center").get<std::vector<double>>()));
      t.driver_env_shifted.push_back(drivers[k].at("env_shifted").get<bool>());
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed ground truth: ") + e.what());
  }
}

void GroundTruth::save(const std::filesystem::path& path) const { io::write_json(path, to_json()); }

GroundTruth GroundTruth::load(const std::filesystem::path& path) { return from_json(io::read_json(path)); }

SynthOutput generate(const SynthConfig& config) {
  config.validate();
  Sampler rng(config.seed);
  const std::size_t k_count = config.n_drivers;
  constexpr std::size_t kHidden = 16;

  GroundTruth t;
  t.f_weights = Matrix(kHidden, static_cast<Eigen::Index>(config.d_env));
  for (Eigen::Index r = 0; r < t.f_weights.rows(); ++r)
    t.f_weights.row(r) = rng.normal_vector(config.d_env, 1.0 / std::sqrt(double(config.d_env))).transpose();
  t.f_bias = rng.normal_vector(kHidden, 0.5);
  // Sum of |v| is capped at 0.5, so the tanh part can never outweigh the
  // difficulty shift.
  Vector v = rng.normal_vector(kHidden);
  t.f_output = 0.5 * v / v.cwiseAbs().sum();
  t.difficulty_direction = rng.unit_vector(config.d_env);
  t.hours_direction = rng.unit_vector(config.d_env);
  t.behavior_gain = config.behavior_gain;
  t.interaction = config.interaction;
  t.env_shift = config.env_shift;
  t.optimum_behavior = rng.normal_vector(config.d_behavior, 0.5);

  for (std::size_t k = 0; k < k_count; ++k) t.driver_ids.push_back(padded("d", k, k_count));

  std::vector<std::size_t> skill_rank(k_count);
  std::iota(skill_rank.begin(), skill_rank.end(), std::size_t{0});
  std::shuffle(skill_rank.begin(), skill_rank.end(), rng.engine());
  t.driver_skills = Vector::Zero(static_cast<Eigen::Index>(k_count));
  const double mid = 0.5 * static_cast<double>(k_count - 1);
  std::uniform_int_distribution<std::size_t> pick(0, k_count - 1);
  const std::size_t optimum_index = pick(rng.engine());
  for (std::size_t k = 0; k < k_count; ++k) {
    if (!config.identical_drivers)
      t.driver_skills(static_cast<Eigen::Index>(k)) =
          config.skill_spacing * (static_cast<double>(skill_rank[k]) - mid);
    Vector center = t.optimum_behavior;
    if (!config.identical_drivers && k != optimum_index)
      center += config.center_radius * rng.unit_vector(config.d_behavior);
    t.driver_behavior_centers.push_back(center);
    t.driver_env_shifted.push_back(config.env_shift_mode && k % 2 == 1);
  }
  t.optimum_driver = t.driver_ids[optimum_index];

  DatasetSchema schema;
  for (std::size_t i = 0; i < config.d_env; ++i) schema.env_columns.push_back(padded("env_", i, config.d_env));
  for (std::size_t i = 0; i < config.d_behavior; ++i) {
    std::string name = padded("beh_", i, config.d_behavior);
    if (i < config.behavior_names.size() && !config.behavior_names[i].empty()) name = config.behavior_names[i];
    schema.behavior_columns.push_back(name);
  }
  schema.performance_columns = {"total_mpg", "driving_hours"};
  schema.target_metric = "total_mpg";
  schema.validate();

  std::vector<TripRecord> records;
  records.reserve(k_count * config.trips_per_driver);
  std::size_t trip = 0;
  for (std::size_t n = 0; n < config.trips_per_driver; ++n) {
    for (std::size_t k = 0; k < k_count; ++k) {
      TripRecord r;
      r.trip_id = padded("t", trip++, k_count * config.trips_per_driver);
      r.driver_id = t.driver_ids[k];
      r.env = rng.normal_vector(config.d_env);
      if (t.driver_env_shifted[k]) r.env += config.env_shift * t.difficulty_direction;
      r.behavior = t.driver_behavior_centers[k] + rng.normal_vector(config.d_behavior, config.behavior_noise);
      r.performance = t.expected_performance(r.env, r.behavior, k);
      r.performance(0) += config.noise_sigma * rng.normal();
      r.performance(1) += config.noise_sigma * rng.normal();
      records.push_back(std::move(r));
    }
  }
  return {Dataset(std::move(schema), std::move(records)), std::move(t)};
}

}  // namespace drivadv::synth
