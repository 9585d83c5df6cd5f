#include "drivadv/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "drivadv/errors.hpp"
#include "drivadv/io.hpp"

namespace drivadv {

namespace {

template <typename F>
void for_each_block(const std::array<DenseLayer, 4>& layers, F&& f) {
  for (const auto& l : layers) {
    f(l.weight);
    f(l.bias);
  }
}

Vector flatten_layers(const std::array<DenseLayer, 4>& layers) {
  std::size_t n = 0;
  for_each_block(layers, [&](const auto& m) { n += static_cast<std::size_t>(m.size()); });
  Vector flat(static_cast<Eigen::Index>(n));
  Eigen::Index pos = 0;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat(pos++) = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat(pos++) = l.bias(r);
  }
  return flat;
}

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

bool layers_finite(const std::array<DenseLayer, 4>& layers) {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

}  // namespace

void MlpConfig::validate() const {
  if (input_dim == 0 || output_dim == 0) throw InvalidConfig("network dimensions must be positive");
  if (hidden_widths.size() != 3)
    throw InvalidConfig("network needs exactly 3 hidden layers, got " +
                        std::to_string(hidden_widths.size()));
  for (auto w : hidden_widths)
    if (w == 0) throw InvalidConfig("hidden layer widths must be positive");
}

Vector MlpGradient::flatten() const { return flatten_layers(layers); }

Mlp::Mlp(MlpConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  std::size_t fan_in = config_.input_dim;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    const std::size_t fan_out = l < 3 ? config_.hidden_widths[l] : config_.output_dim;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto& layer = layers_[l];
    layer.weight.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
    layer.bias = Vector::Zero(static_cast<Eigen::Index>(fan_out));
    fan_in = fan_out;
  }
}

Vector Mlp::forward(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != config_.input_dim)
    throw DimensionMismatch("network input", config_.input_dim, x.size());
  Vector h = x;
  for (std::size_t l = 0; l < 3; ++l)
    h = (layers_[l].weight * h + layers_[l].bias).cwiseMax(0.0);
  return layers_[3].weight * h + layers_[3].bias;
}

Matrix Mlp::forward_batch(const Matrix& inputs) const {
  if (static_cast<std::size_t>(inputs.cols()) != config_.input_dim)
    throw DimensionMismatch("network input", config_.input_dim, inputs.cols());
  Matrix h = inputs.transpose();
  for (std::size_t l = 0; l < 3; ++l)
    h = relu((layers_[l].weight * h).colwise() + layers_[l].bias);
  Matrix out = (layers_[3].weight * h).colwise() + layers_[3].bias;
  return out.transpose();
}

double Mlp::loss(const Vector& x, const Vector& target) const {
  if (static_cast<std::size_t>(target.size()) != config_.output_dim)
    throw DimensionMismatch("network target", config_.output_dim, target.size());
  return (forward(x) - target).squaredNorm() / static_cast<double>(config_.output_dim);
}

double Mlp::batch_gradient(const Matrix& inputs_t, const Matrix& targets_t,
                           MlpGradient* grad) const {
  // Columns are samples.
  std::array<Matrix, 4> pre;
  std::array<Matrix, 4> act;  // act[l] is the input to layer l
  act[0] = inputs_t;
  for (std::size_t l = 0; l < 3; ++l) {
    pre[l] = (layers_[l].weight * act[l]).colwise() + layers_[l].bias;
    act[l + 1] = relu(pre[l]);
  }
  Matrix out = (layers_[3].weight * act[3]).colwise() + layers_[3].bias;
  Matrix diff = out - targets_t;
  const double count = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / count;
  if (grad == nullptr) return loss;

  Matrix delta = diff * (2.0 / count);
  for (std::size_t l = kLayerCount; l-- > 0;) {
    grad->layers[l].weight = delta * act[l].transpose();
    grad->layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Matrix back = layers_[l].weight.transpose() * delta;
    delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

MlpGradient Mlp::gradient(const Vector& x, const Vector& target) const {
  if (static_cast<std::size_t>(x.size()) != config_.input_dim)
    throw DimensionMismatch("network input", config_.input_dim, x.size());
  if (static_cast<std::size_t>(target.size()) != config_.output_dim)
    throw DimensionMismatch("network target", config_.output_dim, target.size());
  MlpGradient g;
  batch_gradient(x, target, &g);
  return g;
}

TrainReport Mlp::train(const Matrix& inputs, const Matrix& targets, const TrainOptions& options) {
  if (options.epochs < 1) throw InvalidConfig("epochs must be at least 1");
  if (options.batch_size < 1) throw InvalidConfig("batch size must be at least 1");
  if (!(options.learning_rate > 0.0)) throw InvalidConfig("learning rate must be positive");
  if (options.validation_fraction < 0.0 || options.validation_fraction >= 1.0)
    throw InvalidConfig("validation fraction must be in [0, 1)");
  if (inputs.rows() < 1) throw EmptyDataset();
  if (static_cast<std::size_t>(inputs.cols()) != config_.input_dim)
    throw DimensionMismatch("training inputs", config_.input_dim, inputs.cols());
  if (static_cast<std::size_t>(targets.cols()) != config_.output_dim)
    throw DimensionMismatch("training targets", config_.output_dim, targets.cols());
  if (targets.rows() != inputs.rows())
    throw DimensionMismatch("training target rows", inputs.rows(), targets.rows());

  std::mt19937_64 rng(options.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  std::vector<Eigen::Index> holdout;
  if (options.validation_fraction > 0.0) {
    std::shuffle(order.begin(), order.end(), rng);
    auto n_val = static_cast<std::size_t>(options.validation_fraction *
                                          static_cast<double>(order.size()));
    n_val = std::min(n_val, order.size() - 1);
    holdout.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
    order.resize(order.size() - n_val);
  }
  auto gather = [](const Matrix& m, const Eigen::Index* rows, std::size_t n) {
    Matrix out(m.cols(), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) out.col(static_cast<Eigen::Index>(k)) = m.row(rows[k]).transpose();
    return out;
  };
  Matrix val_in, val_out;
  if (!holdout.empty()) {
    val_in = gather(inputs, holdout.data(), holdout.size());
    val_out = gather(targets, holdout.data(), holdout.size());
  }

  std::array<DenseLayer, 4> m1, m2;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    m1[l] = {Matrix::Zero(layers_[l].weight.rows(), layers_[l].weight.cols()),
             Vector::Zero(layers_[l].bias.size())};
    m2[l] = m1[l];
  }

  TrainReport report;
  long step = 0;
  MlpGradient grad;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t n = std::min(options.batch_size, order.size() - start);
      Matrix x = gather(inputs, order.data() + start, n);
      Matrix t = gather(targets, order.data() + start, n);
      const double loss = batch_gradient(x, t, &grad);
      if (!std::isfinite(loss)) throw NonFiniteLoss(epoch);

      ++step;
      const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
      auto next = layers_;
      auto adam = [&](auto& param, auto& mom1, auto& mom2, const auto& g) {
        mom1 = options.beta1 * mom1 + (1.0 - options.beta1) * g;
        mom2 = options.beta2 * mom2 + (1.0 - options.beta2) * g.cwiseProduct(g);
        param.array() -= options.learning_rate * (mom1.array() / c1) /
                         ((mom2.array() / c2).sqrt() + options.epsilon);
      };
      for (std::size_t l = 0; l < kLayerCount; ++l) {
        adam(next[l].weight, m1[l].weight, m2[l].weight, grad.layers[l].weight);
        adam(next[l].bias, m1[l].bias, m2[l].bias, grad.layers[l].bias);
      }
      if (!layers_finite(next)) throw NonFiniteLoss(epoch);
      layers_ = std::move(next);
      loss_sum += loss;
      ++batches;
    }
    report.epoch_losses.push_back(loss_sum / static_cast<double>(batches));
    if (!holdout.empty()) report.validation_losses.push_back(batch_gradient(val_in, val_out, nullptr));
  }
  report.final_loss = report.epoch_losses.back();
  return report;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for_each_block(layers_, [&](const auto& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

Vector Mlp::parameters() const { return flatten_layers(layers_); }

void Mlp::set_parameters(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count())
    throw DimensionMismatch("parameter vector", parameter_count(), flat.size());
  Eigen::Index pos = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat(pos++);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat(pos++);
  }
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(l.weight.cols()));
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) row[static_cast<std::size_t>(c)] = l.weight(r, c);
      rows.push_back(std::move(row));
    }
    layers.push_back({{"weight", std::move(rows)},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"config",
           {{"input_dim", config_.input_dim},
            {"hidden_widths", config_.hidden_widths},
            {"output_dim", config_.output_dim}}},
          {"seed", config_.seed},
          {"layers", std::move(layers)}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  try {
    MlpConfig cfg;
    cfg.input_dim = j.at("config").at("input_dim").get<std::size_t>();
    cfg.hidden_widths = j.at("config").at("hidden_widths").get<std::vector<std::size_t>>();
    cfg.output_dim = j.at("config").at("output_dim").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    Mlp net(cfg);
    const auto& layers = j.at("layers");
    if (layers.size() != kLayerCount) throw InvalidConfig("network file must have 4 layers");
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      auto& dst = net.layers_[l];
      const auto& rows = layers[l].at("weight");
      if (rows.size() != static_cast<std::size_t>(dst.weight.rows()))
        throw DimensionMismatch("weight rows", dst.weight.rows(), rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto row = rows[r].get<std::vector<double>>();
        if (row.size() != static_cast<std::size_t>(dst.weight.cols()))
          throw DimensionMismatch("weight cols", dst.weight.cols(), row.size());
        for (std::size_t c = 0; c < row.size(); ++c)
          dst.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
      }
      auto bias = layers[l].at("bias").get<std::vector<double>>();
      if (bias.size() != static_cast<std::size_t>(dst.bias.size()))
        throw DimensionMismatch("bias", dst.bias.size(), bias.size());
      for (std::size_t r = 0; r < bias.size(); ++r) dst.bias(static_cast<Eigen::Index>(r)) = bias[r];
    }
    if (!layers_finite(net.layers_)) throw InvalidConfig("network file has non-finite parameters");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed network file: ") + e.what());
  }
}

void Mlp::save(const std::filesystem::path& path) const { io::write_json(path, to_json()); }

Mlp Mlp::load(const std::filesystem::path& path) { return from_json(io::read_json(path)); }

}  // namespace drivadv
