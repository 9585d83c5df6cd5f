#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drivadv/trip_data.hpp"

namespace drivadv::synth {

struct SynthConfig {
  std::size_t n_drivers = 20;
  std::size_t trips_per_driver = 100;
  std::size_t d_env = 8;
  std::size_t d_behavior = 6;
  double skill_spacing = 0.25;
  double noise_sigma = 0.05;
  // Odd-indexed drivers draw environments shifted along the difficulty axis.
  bool env_shift_mode = false;
  std::uint64_t seed = 0;

  // Every driver gets skill 0 and the same behavior center.
  bool identical_drivers = false;
  // Curvature of the concave behavior effect g(a) = -gain * |a - a*|^2.
  double behavior_gain = 0.02;
  // Distance of the non-optimal drivers' behavior centers from a*.
  double center_radius = 3.0;
  double behavior_noise = 1.0;
  double env_shift = 4.0;
  // Scale of an optional f(s) * g(a) cross term in total_mpg.
  double interaction = 0.0;
  // Overrides for behavior column names; empty entries keep the default.
  std::vector<std::string> behavior_names;

  void validate() const;
};

// Everything the generator used, so tests can recompute every row.
struct GroundTruth {
  // f(s) = sum_h v_h tanh(W_h . s + b_h) - slope * (u . s)
  Matrix f_weights;
  Vector f_bias;
  Vector f_output;
  Vector difficulty_direction;
  double difficulty_slope = 0.5;
  // driving_hours = 5 + hours_slope * (hours_direction . s) - 0.2 g(a)
  Vector hours_direction;
  double hours_slope = 0.3;
  double mpg_base = 6.5;
  double behavior_gain = 0.02;
  double interaction = 0.0;
  double env_shift = 4.0;

  std::vector<std::string> driver_ids;
  Vector driver_skills;
  std::vector<Vector> driver_behavior_centers;
  std::vector<bool> driver_env_shifted;
  Vector optimum_behavior;
  std::string optimum_driver;

  double env_effect(const Vector& s) const;
  double behavior_effect(const Vector& a) const;
  // Noise-free total_mpg and driving_hours for one trip.
  Vector expected_performance(const Vector& s, const Vector& a, std::size_t driver) const;
  std::size_t driver_position(const std::string& id) const;

  nlohmann::json to_json() const;
  static GroundTruth from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static GroundTruth load(const std::filesystem::path& path);
};

struct SynthOutput {
  Dataset dataset;
  GroundTruth truth;
};

SynthOutput generate(const SynthConfig& config);

}  // namespace drivadv::synth
