#include "drivadv/normalization.hpp"

#include <cmath>
#include <cstring>

#include "drivadv/errors.hpp"
#include "drivadv/io.hpp"

namespace drivadv {

NormalizationStats::NormalizationStats(Vector mean, Vector std, std::set<std::size_t> degenerate,
                                       SliceLayout layout)
    : mean_(std::move(mean)),
      std_(std::move(std)),
      degenerate_(std::move(degenerate)),
      layout_(layout) {
  if (static_cast<std::size_t>(mean_.size()) != layout_.total())
    throw DimensionMismatch("normalization mean", layout_.total(), mean_.size());
  if (std_.size() != mean_.size())
    throw DimensionMismatch("normalization std", mean_.size(), std_.size());
  for (Eigen::Index d = 0; d < std_.size(); ++d)
    if (!(std_(d) > 0.0) || !std::isfinite(std_(d)) || !std::isfinite(mean_(d)))
      throw InvalidConfig("normalization std must be finite and positive");
}

Vector NormalizationStats::apply(const Vector& x, std::size_t offset, std::size_t len,
                                 const char* what) const {
  if (static_cast<std::size_t>(x.size()) != len) throw DimensionMismatch(what, len, x.size());
  auto o = static_cast<Eigen::Index>(offset);
  auto n = static_cast<Eigen::Index>(len);
  return ((x - mean_.segment(o, n)).array() / std_.segment(o, n).array()).matrix();
}

Vector NormalizationStats::invert(const Vector& z, std::size_t offset, std::size_t len,
                                  const char* what) const {
  if (static_cast<std::size_t>(z.size()) != len) throw DimensionMismatch(what, len, z.size());
  auto o = static_cast<Eigen::Index>(offset);
  auto n = static_cast<Eigen::Index>(len);
  return (z.array() * std_.segment(o, n).array() + mean_.segment(o, n).array()).matrix();
}

Vector NormalizationStats::normalize(const Vector& x) const {
  return apply(x, 0, layout_.total(), "stacked vector");
}

Vector NormalizationStats::denormalize(const Vector& z) const {
  return invert(z, 0, layout_.total(), "stacked vector");
}

Vector NormalizationStats::normalize_env(const Vector& s) const {
  return apply(s, 0, layout_.env_dim, "env vector");
}

Vector NormalizationStats::normalize_behavior(const Vector& a) const {
  return apply(a, layout_.behavior_offset(), layout_.behavior_dim, "behavior vector");
}

Vector NormalizationStats::normalize_performance(const Vector& q) const {
  return apply(q, layout_.performance_offset(), layout_.performance_dim, "performance vector");
}

Vector NormalizationStats::denormalize_env(const Vector& s) const {
  return invert(s, 0, layout_.env_dim, "env vector");
}

Vector NormalizationStats::denormalize_behavior(const Vector& a) const {
  return invert(a, layout_.behavior_offset(), layout_.behavior_dim, "behavior vector");
}

Vector NormalizationStats::denormalize_performance(const Vector& q) const {
  return invert(q, layout_.performance_offset(), layout_.performance_dim, "performance vector");
}

double NormalizationStats::performance_std(std::size_t index) const {
  if (index >= layout_.performance_dim)
    throw DimensionMismatch("performance index", layout_.performance_dim, index);
  return std_(static_cast<Eigen::Index>(layout_.performance_offset() + index));
}

std::string NormalizationStats::fingerprint() const {
  std::uint64_t h = io::fnv1a(std::string_view(reinterpret_cast<const char*>(mean_.data()),
                                               sizeof(double) * mean_.size()));
  h = io::fnv1a(std::string_view(reinterpret_cast<const char*>(std_.data()),
                                 sizeof(double) * std_.size()),
                h);
  std::size_t dims[3] = {layout_.env_dim, layout_.behavior_dim, layout_.performance_dim};
  h = io::fnv1a(std::string_view(reinterpret_cast<const char*>(dims), sizeof dims), h);
  return io::hex64(h);
}

nlohmann::json NormalizationStats::to_json() const {
  return {{"mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
          {"std", std::vector<double>(std_.data(), std_.data() + std_.size())},
          {"degenerate_dims", degenerate_},
          {"slices",
           {{"env_dim", layout_.env_dim},
            {"behavior_dim", layout_.behavior_dim},
            {"performance_dim", layout_.performance_dim}}},
          {"fingerprint", fingerprint()}};
}

NormalizationStats NormalizationStats::from_json(const nlohmann::json& j) {
  try {
    auto mean = j.at("mean").get<std::vector<double>>();
    auto std = j.at("std").get<std::vector<double>>();
    SliceLayout layout{j.at("slices").at("env_dim").get<std::size_t>(),
                       j.at("slices").at("behavior_dim").get<std::size_t>(),
                       j.at("slices").at("performance_dim").get<std::size_t>()};
    return NormalizationStats(Eigen::Map<Vector>(mean.data(), mean.size()),
                              Eigen::Map<Vector>(std.data(), std.size()),
                              j.at("degenerate_dims").get<std::set<std::size_t>>(), layout);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed normalization stats: ") + e.what());
  }
}

void NormalizationStats::save(const std::filesystem::path& path) const {
  io::write_json(path, to_json());
}

NormalizationStats NormalizationStats::load(const std::filesystem::path& path) {
  return from_json(io::read_json(path));
}

NormalizationStats fit_stats(const Dataset& ds) {
  const std::size_t n = ds.size();
  if (n < 2) throw TooFewSamples(2, n);
  const auto& schema = ds.schema();
  SliceLayout layout{schema.env_dim(), schema.behavior_dim(), schema.performance_dim()};
  const auto dim = static_cast<Eigen::Index>(layout.total());

  Vector mean = Vector::Zero(dim);
  for (std::size_t i = 0; i < n; ++i) mean += ds.stacked(i);
  mean /= static_cast<double>(n);

  // Two-pass variance about the mean.
  Vector var = Vector::Zero(dim);
  for (std::size_t i = 0; i < n; ++i) var += (ds.stacked(i) - mean).array().square().matrix();
  var /= static_cast<double>(n - 1);

  Vector std(dim);
  std::set<std::size_t> degenerate;
  for (Eigen::Index d = 0; d < dim; ++d) {
    if (var(d) < NormalizationStats::kVarianceTolerance) {
      degenerate.insert(static_cast<std::size_t>(d));
      std(d) = 1.0;
    } else {
      std(d) = std::sqrt(var(d));
    }
  }
  return NormalizationStats(std::move(mean), std::move(std), std::move(degenerate), layout);
}

}  // namespace drivadv
