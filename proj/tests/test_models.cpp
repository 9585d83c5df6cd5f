#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "drivadv/errors.hpp"
#include "drivadv/models.hpp"
#include "drivadv/synth.hpp"
#include "oracles.hpp"

using namespace drivadv;

namespace {

// q = M s (two outputs), behavior is unrelated noise.
Dataset linear_dataset(std::size_t n, std::uint64_t seed, bool constant_q = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  DatasetSchema schema;
  schema.env_columns = {"e0", "e1", "e2", "e3"};
  schema.behavior_columns = {"b0", "b1"};
  schema.performance_columns = {"total_mpg", "fuel"};
  Matrix m(2, 4);
  m << 0.5, -1.0, 0.25, 2.0, 1.0, 0.0, -0.5, 0.3;
  std::vector<TripRecord> rows;
  for (std::size_t i = 0; i < n; ++i) {
    TripRecord r{"t" + std::to_string(i), "d" + std::to_string(i % 5), Vector(4), Vector(2), Vector(2)};
    for (Eigen::Index k = 0; k < 4; ++k) r.env(k) = z(rng);
    for (Eigen::Index k = 0; k < 2; ++k) r.behavior(k) = z(rng);
    r.performance = constant_q ? Vector::Constant(2, 7.0) : Vector(m * r.env);
    rows.push_back(r);
  }
  return Dataset(schema, rows);
}

ModelHyper quick_hyper(int epochs = 100) {
  ModelHyper h;
  h.epochs = epochs;
  h.hidden_widths = {32, 32, 32};
  return h;
}

// Q(s, a) = V(s): behavior net copies the baseline and ignores a.
BehaviorModel behavior_copy(const BaselineModel& base) {
  const auto& stats = base.stats();
  const auto& l = stats->layout();
  MlpConfig cfg = base.net().config();
  cfg.input_dim = l.env_dim + l.behavior_dim;
  Mlp net(cfg);
  for (std::size_t k = 0; k < 4; ++k) net.layer(k) = base.net().layer(k);
  Matrix w = Matrix::Zero(net.layer(0).weight.rows(), static_cast<Eigen::Index>(cfg.input_dim));
  w.leftCols(static_cast<Eigen::Index>(l.env_dim)) = base.net().layer(0).weight;
  net.layer(0).weight = w;
  return BehaviorModel(std::move(net), stats);
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("baseline fits a linear environment effect") {
  auto ds = linear_dataset(1000, 1);
  auto stats = std::make_shared<const NormalizationStats>(fit_stats(ds));
  auto x = normalized_env_matrix(ds, *stats);
  auto y = normalized_performance_matrix(ds, *stats);
  CHECK(oracle::linear_fit_mse(x, y) < 1e-20);
  auto [model, report] = train_baseline(ds, stats, quick_hyper());
  CHECK(report.epoch_losses.size() == 100);
  CHECK(report.final_loss < 0.01);
}

TEST_CASE("baseline on constant performance") {
  auto ds = linear_dataset(300, 2, true);
  auto stats = std::make_shared<const NormalizationStats>(fit_stats(ds));
  auto hyper = quick_hyper(1000);
  hyper.hidden_widths = {16, 16, 16};
  hyper.batch_size = 16;
  auto [model, report] = train_baseline(ds, stats, hyper);
  CHECK(report.final_loss < 1e-4);
}

TEST_CASE("behavior model beats the baseline when behavior matters") {
  synth::SynthConfig cfg;
  cfg.n_drivers = 10;
  cfg.trips_per_driver = 100;
  cfg.noise_sigma = 0.0;
  cfg.behavior_gain = 0.2;
  cfg.seed = 5;
  auto ds = synth::generate(cfg).dataset;
  auto stats = std::make_shared<const NormalizationStats>(fit_stats(ds));
  auto [v, rv] = train_baseline(ds, stats, quick_hyper());
  auto [q, rq] = train_behavior(ds, stats, quick_hyper());
  CHECK(rq.final_loss < rv.final_loss);
}

TEST_CASE("behavior model is no worse than 2x baseline when behavior is irrelevant") {
  synth::SynthConfig cfg;
  cfg.n_drivers = 10;
  cfg.trips_per_driver = 100;
  cfg.identical_drivers = true;
  cfg.behavior_gain = 1e-12;
  cfg.seed = 3;
  auto ds = synth::generate(cfg).dataset;
  auto stats = std::make_shared<const NormalizationStats>(fit_stats(ds));
  auto [v, rv] = train_baseline(ds, stats, quick_hyper());
  auto [q, rq] = train_behavior(ds, stats, quick_hyper());
  CHECK(rq.final_loss < 2.0 * rv.final_loss);
}

TEST_CASE("baseline tracks the generator's environment effect") {
  synth::SynthConfig cfg;
  cfg.n_drivers = 10;
  cfg.trips_per_driver = 150;
  cfg.noise_sigma = 0.0;
  cfg.identical_drivers = true;
  cfg.behavior_noise = 0.0;  // behavior constant, so q depends on s alone
  cfg.seed = 8;
  auto gen = synth::generate(cfg);
  auto stats = std::make_shared<const NormalizationStats>(fit_stats(gen.dataset));
  ModelHyper hyper;
  hyper.epochs = 300;
  auto [v, rv] = train_baseline(gen.dataset, stats, hyper);
  const std::size_t m = gen.dataset.schema().metric_index();
  const double g0 = gen.truth.behavior_effect(gen.truth.optimum_behavior);
  for (std::size_t i = 0; i < gen.dataset.size(); i += 7) {
    const auto& r = gen.dataset[i];
    Vector q = gen.truth.expected_performance(r.env, r.behavior, 0);
    CHECK(q(0) == doctest::Approx(gen.truth.mpg_base + gen.truth.env_effect(r.env) + g0));
    const double truth = stats->normalize_performance(q)(static_cast<Eigen::Index>(m));
    CHECK(std::abs(v.value(r.env)(static_cast<Eigen::Index>(m)) - truth) < 0.15);
  }
}

TEST_CASE("zero-weight baseline and purity") {
  auto ds = linear_dataset(50, 4);
  auto stats = std::make_shared<const NormalizationStats>(fit_stats(ds));
  Mlp net(MlpConfig{4, {8, 8, 8}, 2, 0});
  net.set_parameters(Vector::Zero(static_cast<Eigen::Index>(net.parameter_count())));
  BaselineModel zero(net, stats);
  CHECK(zero.value(ds[0].env).isZero());
  BaselineModel random(Mlp(MlpConfig{4, {8, 8, 8}, 2, 3}), stats);
  CHECK(random.value(ds[1].env) == random.value(ds[1].env));
  CHECK_THROWS_AS(random.value(Vector::Zero(3)), DimensionMismatch);
}

TEST_CASE("advantage wiring") {
  auto ds = linear_dataset(80, 6);
  auto stats = std::make_shared<const NormalizationStats>(fit_stats(ds));
  BaselineModel base(Mlp(MlpConfig{4, {8, 8, 8}, 2, 11}), stats);

  AdvantageModel flat(base, behavior_copy(base), 0);
  for (std::size_t i = 0; i < 10; ++i) CHECK(flat.advantage(ds[i].env, ds[i].behavior) == 0.0);

  AdvantageModel model(base, BehaviorModel(Mlp(MlpConfig{6, {8, 8, 8}, 2, 12}), stats), 0);
  const Vector s = ds[0].env;
  const Vector a1 = ds[1].behavior, a2 = ds[2].behavior;
  const double q1 = model.behavior().value(s, a1)(0), q2 = model.behavior().value(s, a2)(0);
  const double v = model.baseline().value(s)(0);
  CHECK(model.advantage(s, a1) == q1 - v);
  CHECK(model.advantage(s, a1) - model.advantage(s, a2) == doctest::Approx(q1 - q2).epsilon(1e-12));
  CHECK_THROWS_AS(model.advantage(s, Vector::Zero(3)), DimensionMismatch);
  CHECK_THROWS_AS(AdvantageModel(base, behavior_copy(base), 2), DimensionMismatch);
}

TEST_CASE("sub-models with different normalization are rejected") {
  auto s1 = std::make_shared<const NormalizationStats>(fit_stats(linear_dataset(50, 1)));
  auto s2 = std::make_shared<const NormalizationStats>(fit_stats(linear_dataset(50, 2)));
  BaselineModel base(Mlp(MlpConfig{4, {4, 4, 4}, 2, 0}), s1);
  BehaviorModel beh(Mlp(MlpConfig{6, {4, 4, 4}, 2, 0}), s2);
  CHECK_THROWS_AS(AdvantageModel(base, beh, 0), InvalidConfig);
}

TEST_CASE("bundle save and load reproduce advantages bitwise") {
  auto ds = linear_dataset(200, 9);
  auto bundle = train_bundle(ds, quick_hyper(3));
  auto dir = std::filesystem::temp_directory_path() / "drivadv_bundle_test";
  std::filesystem::remove_all(dir);
  bundle.save(dir);
  for (const char* f : {"baseline.json", "behavior.json", "stats.json", "meta.json"})
    CHECK(std::filesystem::exists(dir / f));
  auto back = ModelBundle::load(dir);
  for (std::size_t i = 0; i < 20; ++i)
    CHECK(back.model.advantage(ds[i].env, ds[i].behavior) == bundle.model.advantage(ds[i].env, ds[i].behavior));
  CHECK(back.schema == bundle.schema);
  CHECK(back.behavior_min == bundle.behavior_min);
  CHECK(back.baseline_report.epoch_losses == bundle.baseline_report.epoch_losses);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(ModelBundle::load(dir), ConfigError);
}

TEST_CASE("advantage residuals average out on additive data") {
  synth::SynthConfig cfg;
  cfg.n_drivers = 10;
  cfg.trips_per_driver = 100;
  cfg.identical_drivers = true;
  cfg.behavior_gain = 0.2;
  cfg.seed = 12;
  auto gen = synth::generate(cfg);
  auto bundle = train_bundle(gen.dataset, quick_hyper());
  const auto& stats = bundle.model.stats();
  const double sd = stats.performance_std(bundle.model.metric_index());
  std::vector<double> g;
  for (const auto& r : gen.dataset.records()) g.push_back(gen.truth.behavior_effect(r.behavior) / sd);
  const double g_mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
  double resid = 0.0;
  for (std::size_t i = 0; i < gen.dataset.size(); ++i)
    resid += bundle.model.advantage(gen.dataset[i].env, gen.dataset[i].behavior) - (g[i] - g_mean);
  CHECK(std::abs(resid / static_cast<double>(gen.dataset.size())) < 0.1);
}

}
