#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "drivadv/trip_data.hpp"

namespace drivadv {

struct MlpConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths = {64, 64, 64};
  std::size_t output_dim = 1;
  std::uint64_t seed = 0;

  // Exactly three hidden layers, all widths positive.
  void validate() const;
  bool operator==(const MlpConfig&) const = default;
};

struct DenseLayer {
  Matrix weight;  // (out x in)
  Vector bias;
};

// One entry per layer, same shapes as the network parameters.
struct MlpGradient {
  std::array<DenseLayer, 4> layers;
  Vector flatten() const;
};

struct TrainOptions {
  int epochs = 100;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  // Fraction of rows held out for validation losses; 0 trains on everything.
  double validation_fraction = 0.0;
};

struct TrainReport {
  std::vector<double> epoch_losses;
  double final_loss = 0.0;
  std::vector<double> validation_losses;
};

// Three ReLU hidden layers followed by a linear output layer.
class Mlp {
 public:
  static constexpr std::size_t kLayerCount = 4;

  // Uniform weights in +-sqrt(6 / fan_in), zero biases, drawn from config.seed.
  explicit Mlp(MlpConfig config);

  const MlpConfig& config() const { return config_; }
  std::size_t input_dim() const { return config_.input_dim; }
  std::size_t output_dim() const { return config_.output_dim; }

  DenseLayer& layer(std::size_t i) { return layers_.at(i); }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }

  Vector forward(const Vector& x) const;
  // Row i of the result is the output for row i of inputs.
  Matrix forward_batch(const Matrix& inputs) const;

  // Mean over output dims of the squared error.
  double loss(const Vector& x, const Vector& target) const;
  MlpGradient gradient(const Vector& x, const Vector& target) const;

  // Mini-batch Adam on MSE. Throws NonFiniteLoss and leaves the network at
  // its last finite parameters.
  TrainReport train(const Matrix& inputs, const Matrix& targets, const TrainOptions& options);

  std::size_t parameter_count() const;
  // Layer by layer: weights row-major, then biases.
  Vector parameters() const;
  void set_parameters(const Vector& flat);

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Mlp load(const std::filesystem::path& path);

 private:
  // Batch loss and gradient for columns of inputs/targets.
  double batch_gradient(const Matrix& inputs_t, const Matrix& targets_t, MlpGradient* grad) const;

  MlpConfig config_;
  std::array<DenseLayer, kLayerCount> layers_;
};

}  // namespace drivadv
