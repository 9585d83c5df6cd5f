#include "drivadv/models.hpp"

#include <limits>

#include "drivadv/errors.hpp"
#include "drivadv/io.hpp"

namespace drivadv {

namespace {

nlohmann::json report_json(const TrainReport& r) {
  return {{"epoch_losses", r.epoch_losses},
          {"final_loss", r.final_loss},
          {"validation_losses", r.validation_losses}};
}

TrainReport report_from_json(const nlohmann::json& j) {
  TrainReport r;
  r.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  r.final_loss = j.at("final_loss").get<double>();
  r.validation_losses = j.value("validation_losses", std::vector<double>{});
  return r;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_net(const Mlp& net, std::size_t in, std::size_t out, const char* what) {
  if (net.input_dim() != in) throw DimensionMismatch(std::string(what) + " input", in, net.input_dim());
  if (net.output_dim() != out)
    throw DimensionMismatch(std::string(what) + " output", out, net.output_dim());
}

MlpConfig net_config(std::size_t in, std::size_t out, const ModelHyper& hyper, std::uint64_t seed) {
  MlpConfig cfg;
  cfg.input_dim = in;
  cfg.output_dim = out;
  cfg.hidden_widths = hyper.hidden_widths;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TrainOptions ModelHyper::train_options(std::uint64_t seed) const {
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = batch_size;
  o.learning_rate = learning_rate;
  o.seed = seed;
  o.validation_fraction = validation_fraction;
  return o;
}

nlohmann::json ModelHyper::to_json() const {
  return {{"hidden_widths", hidden_widths},       {"epochs", epochs},
          {"batch_size", batch_size},             {"learning_rate", learning_rate},
          {"baseline_seed", baseline_seed},       {"behavior_seed", behavior_seed},
          {"validation_fraction", validation_fraction}};
}

ModelHyper ModelHyper::from_json(const nlohmann::json& j) {
  ModelHyper h;
  h.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
  h.epochs = j.at("epochs").get<int>();
  h.batch_size = j.at("batch_size").get<std::size_t>();
  h.learning_rate = j.at("learning_rate").get<double>();
  h.baseline_seed = j.at("baseline_seed").get<std::uint64_t>();
  h.behavior_seed = j.at("behavior_seed").get<std::uint64_t>();
  h.validation_fraction = j.value("validation_fraction", 0.0);
  return h;
}

BaselineModel::BaselineModel(Mlp net, StatsPtr stats) : net_(std::move(net)), stats_(std::move(stats)) {
  if (!stats_) throw InvalidConfig("baseline model needs normalization stats");
  check_net(net_, stats_->layout().env_dim, stats_->layout().performance_dim, "baseline network");
}

Vector BaselineModel::value(const Vector& env_raw) const {
  return value_normalized(stats_->normalize_env(env_raw));
}

Vector BaselineModel::value_normalized(const Vector& env) const { return net_.forward(env); }

BehaviorModel::BehaviorModel(Mlp net, StatsPtr stats) : net_(std::move(net)), stats_(std::move(stats)) {
  if (!stats_) throw InvalidConfig("behavior model needs normalization stats");
  const auto& l = stats_->layout();
  check_net(net_, l.env_dim + l.behavior_dim, l.performance_dim, "behavior network");
}

Vector BehaviorModel::value(const Vector& env_raw, const Vector& behavior_raw) const {
  return value_normalized(stats_->normalize_env(env_raw), stats_->normalize_behavior(behavior_raw));
}

Vector BehaviorModel::value_normalized(const Vector& env, const Vector& behavior) const {
  const auto& l = stats_->layout();
  if (static_cast<std::size_t>(env.size()) != l.env_dim)
    throw DimensionMismatch("env vector", l.env_dim, env.size());
  if (static_cast<std::size_t>(behavior.size()) != l.behavior_dim)
    throw DimensionMismatch("behavior vector", l.behavior_dim, behavior.size());
  Vector x(env.size() + behavior.size());
  x << env, behavior;
  return net_.forward(x);
}

AdvantageModel::AdvantageModel(BaselineModel baseline, BehaviorModel behavior,
                               std::size_t metric_index)
    : baseline_(std::move(baseline)), behavior_(std::move(behavior)), metric_index_(metric_index) {
  if (baseline_.stats()->fingerprint() != behavior_.stats()->fingerprint())
    throw InvalidConfig("baseline and behavior models use different normalization stats");
  if (metric_index_ >= baseline_.stats()->layout().performance_dim)
    throw DimensionMismatch("metric index", baseline_.stats()->layout().performance_dim,
                            metric_index_);
}

AdvantageModel::Breakdown AdvantageModel::evaluate_normalized(const Vector& env,
                                                              const Vector& behavior) const {
  const auto m = static_cast<Eigen::Index>(metric_index_);
  Breakdown b;
  b.behavior_value = behavior_.value_normalized(env, behavior)(m);
  b.baseline_value = baseline_.value_normalized(env)(m);
  b.advantage = b.behavior_value - b.baseline_value;
  return b;
}

double AdvantageModel::advantage_normalized(const Vector& env, const Vector& behavior) const {
  return evaluate_normalized(env, behavior).advantage;
}

double AdvantageModel::advantage(const Vector& env_raw, const Vector& behavior_raw) const {
  return advantage_normalized(stats().normalize_env(env_raw), stats().normalize_behavior(behavior_raw));
}

Matrix normalized_env_matrix(const Dataset& ds, const NormalizationStats& stats) {
  Matrix m(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(stats.layout().env_dim));
  for (std::size_t i = 0; i < ds.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = stats.normalize_env(ds[i].env).transpose();
  return m;
}

Matrix normalized_env_behavior_matrix(const Dataset& ds, const NormalizationStats& stats) {
  const auto& l = stats.layout();
  Matrix m(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(l.env_dim + l.behavior_dim));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    m.row(row).head(static_cast<Eigen::Index>(l.env_dim)) = stats.normalize_env(ds[i].env).transpose();
    m.row(row).tail(static_cast<Eigen::Index>(l.behavior_dim)) =
        stats.normalize_behavior(ds[i].behavior).transpose();
  }
  return m;
}

Matrix normalized_performance_matrix(const Dataset& ds, const NormalizationStats& stats) {
  Matrix m(static_cast<Eigen::Index>(ds.size()),
           static_cast<Eigen::Index>(stats.layout().performance_dim));
  for (std::size_t i = 0; i < ds.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = stats.normalize_performance(ds[i].performance).transpose();
  return m;
}

std::pair<BaselineModel, TrainReport> train_baseline(const Dataset& ds, StatsPtr stats,
                                                     const ModelHyper& hyper) {
  const auto& l = stats->layout();
  Mlp net(net_config(l.env_dim, l.performance_dim, hyper, hyper.baseline_seed));
  auto report = net.train(normalized_env_matrix(ds, *stats), normalized_performance_matrix(ds, *stats),
                          hyper.train_options(hyper.baseline_seed));
  return {BaselineModel(std::move(net), std::move(stats)), std::move(report)};
}

std::pair<BehaviorModel, TrainReport> train_behavior(const Dataset& ds, StatsPtr stats,
                                                     const ModelHyper& hyper) {
  const auto& l = stats->layout();
  Mlp net(net_config(l.env_dim + l.behavior_dim, l.performance_dim, hyper, hyper.behavior_seed));
  auto report = net.train(normalized_env_behavior_matrix(ds, *stats),
                          normalized_performance_matrix(ds, *stats),
                          hyper.train_options(hyper.behavior_seed));
  return {BehaviorModel(std::move(net), std::move(stats)), std::move(report)};
}

ModelBundle train_bundle(const Dataset& ds, const ModelHyper& hyper) {
  auto stats = std::make_shared<const NormalizationStats>(fit_stats(ds));
  auto [baseline, baseline_report] = train_baseline(ds, stats, hyper);
  auto [behavior, behavior_report] = train_behavior(ds, stats, hyper);

  const auto dim = static_cast<Eigen::Index>(stats->layout().behavior_dim);
  Vector lo = Vector::Constant(dim, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const auto& r : ds.records()) {
    Vector a = stats->normalize_behavior(r.behavior);
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(a);
  }
  return ModelBundle{AdvantageModel(std::move(baseline), std::move(behavior),
                                    ds.schema().metric_index()),
                     ds.schema(),
                     hyper,
                     std::move(baseline_report),
                     std::move(behavior_report),
                     std::move(lo),
                     std::move(hi)};
}

void ModelBundle::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  model.baseline().net().save(dir / "baseline.json");
  model.behavior().net().save(dir / "behavior.json");
  model.stats().save(dir / "stats.json");
  nlohmann::json meta = {{"schema", schema.to_json()},
                         {"schema_fingerprint", schema.fingerprint()},
                         {"stats_fingerprint", model.stats().fingerprint()},
                         {"metric_index", model.metric_index()},
                         {"hyperparameters", hyper.to_json()},
                         {"seeds", {{"baseline", hyper.baseline_seed}, {"behavior", hyper.behavior_seed}}},
                         {"training",
                          {{"baseline", report_json(baseline_report)},
                           {"behavior", report_json(behavior_report)}}},
                         {"behavior_range", {{"min", to_std(behavior_min)}, {"max", to_std(behavior_max)}}}};
  io::write_json(dir / "meta.json", meta);
}

ModelBundle ModelBundle::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ConfigError("model bundle '" + dir.string() + "' does not exist");
  try {
    auto meta = io::read_json(dir / "meta.json");
    auto stats = std::make_shared<const NormalizationStats>(NormalizationStats::load(dir / "stats.json"));
    if (meta.at("stats_fingerprint").get<std::string>() != stats->fingerprint())
      throw InvalidConfig("stats.json does not match the bundle metadata");
    auto schema = DatasetSchema::from_json(meta.at("schema"));
    BaselineModel baseline(Mlp::load(dir / "baseline.json"), stats);
    BehaviorModel behavior(Mlp::load(dir / "behavior.json"), stats);
    const auto& training = meta.at("training");
    return ModelBundle{AdvantageModel(std::move(baseline), std::move(behavior),
                                      meta.at("metric_index").get<std::size_t>()),
                       std::move(schema),
                       ModelHyper::from_json(meta.at("hyperparameters")),
                       report_from_json(training.at("baseline")),
                       report_from_json(training.at("behavior")),
                       from_std(meta.at("behavior_range").at("min").get<std::vector<double>>()),
                       from_std(meta.at("behavior_range").at("max").get<std::vector<double>>())};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed bundle metadata: ") + e.what());
  }
}

}  // namespace drivadv
