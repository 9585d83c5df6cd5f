#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <string>

#include "drivadv/trip_data.hpp"

namespace drivadv {

// Offsets of the s, a and q blocks inside a stacked vector [s; a; q].
struct SliceLayout {
  std::size_t env_dim = 0;
  std::size_t behavior_dim = 0;
  std::size_t performance_dim = 0;

  std::size_t total() const { return env_dim + behavior_dim + performance_dim; }
  std::size_t behavior_offset() const { return env_dim; }
  std::size_t performance_offset() const { return env_dim + behavior_dim; }
  bool operator==(const SliceLayout&) const = default;
};

// Per-dimension z-score statistics over the stacked trip vectors.
class NormalizationStats {
 public:
  // Raw variance below this is treated as a constant column.
  static constexpr double kVarianceTolerance = 1e-12;

  NormalizationStats(Vector mean, Vector std, std::set<std::size_t> degenerate, SliceLayout layout);

  const Vector& mean() const { return mean_; }
  const Vector& std() const { return std_; }
  const std::set<std::size_t>& degenerate_dims() const { return degenerate_; }
  const SliceLayout& layout() const { return layout_; }

  Vector normalize(const Vector& x) const;
  Vector denormalize(const Vector& z) const;

  Vector normalize_env(const Vector& s) const;
  Vector normalize_behavior(const Vector& a) const;
  Vector normalize_performance(const Vector& q) const;
  Vector denormalize_env(const Vector& s) const;
  Vector denormalize_behavior(const Vector& a) const;
  Vector denormalize_performance(const Vector& q) const;

  // Standard deviation of one performance dimension; converts normalized
  // advantages into raw units.
  double performance_std(std::size_t index) const;

  // Hash over the exact bits of mean/std/layout.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static NormalizationStats from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static NormalizationStats load(const std::filesystem::path& path);

 private:
  Vector apply(const Vector& x, std::size_t offset, std::size_t len, const char* what) const;
  Vector invert(const Vector& z, std::size_t offset, std::size_t len, const char* what) const;

  Vector mean_;
  Vector std_;
  std::set<std::size_t> degenerate_;
  SliceLayout layout_;
};

// Mean and unbiased (N-1) standard deviation of every stacked dimension.
// Constant columns get std 1. Throws TooFewSamples when N < 2.
NormalizationStats fit_stats(const Dataset& ds);

}  // namespace drivadv
