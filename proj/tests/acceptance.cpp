// Acceptance suite. Usage: acceptance <work-dir>
// Prints one PASS/FAIL line per criterion and exits non-zero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "drivadv/cli.hpp"
#include "drivadv/cmaes.hpp"
#include "drivadv/io.hpp"
#include "drivadv/models.hpp"
#include "drivadv/normalization.hpp"
#include "drivadv/placement.hpp"
#include "drivadv/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace drivadv;

namespace {

fs::path g_work;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// Runs the CLI in-process; a non-zero exit aborts the criterion.
void cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) {
    std::string cmd;
    for (const auto& a : args) cmd += a + " ";
    throw std::runtime_error("`drivadv " + cmd + "` exited " + std::to_string(code) + ": " + err.str());
  }
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(io::read_text(p));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// driver_id -> mean_advantage from ranking.csv
std::map<std::string, double> read_ranking(const fs::path& p) {
  std::map<std::string, double> out;
  for (const auto& r : read_csv_rows(p)) out[r.at(1)] = std::stod(r.at(2));
  return out;
}

// Synthesize, train with default hyperparameters, rank.
fs::path pipeline(const fs::path& dir, const std::vector<std::string>& synth_args, const std::string& seed) {
  std::vector<std::string> s = {"synth", "--seed", seed, "--out", (dir / "data").string()};
  s.insert(s.end(), synth_args.begin(), synth_args.end());
  cli(s);
  cli({"train", "--data", (dir / "data/data.csv").string(), "--schema", (dir / "data/schema.json").string(),
       "--bundle", (dir / "bundle").string(), "--seed", seed});
  cli({"rank", "--data", (dir / "data/data.csv").string(), "--schema", (dir / "data/schema.json").string(),
       "--bundle", (dir / "bundle").string(), "--out", (dir / "rank").string()});
  return dir;
}

Outcome gradient_check() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> width(1, 6), io_dim(1, 4);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  std::size_t checked = 0, kinks = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Mlp net(MlpConfig{io_dim(rng), {width(rng), width(rng), width(rng)}, io_dim(rng), rng()});
    Vector x(static_cast<Eigen::Index>(net.input_dim())), t(static_cast<Eigen::Index>(net.output_dim()));
    for (auto& v : x) v = n(rng);
    for (auto& v : t) v = n(rng);
    const Vector g = net.gradient(x, t).flatten();
    const auto fd = oracle::central_difference(net, x, t);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (fd.at_kink[static_cast<std::size_t>(i)]) {
        ++kinks;
        continue;
      }
      const double denom = std::max({std::abs(g(i)), std::abs(fd.gradient(i)), 1e-6});
      worst = std::max(worst, std::abs(g(i) - fd.gradient(i)) / denom);
      ++checked;
    }
  }
  return {worst < 1e-4, "max rel err " + fmt(worst) + " over " + std::to_string(checked) + " coords, " +
                            std::to_string(kinks) + " kink coords skipped"};
}

Outcome normalization_check() {
  double worst_mean = 0.0, worst_std = 0.0, worst_round = 0.0;
  for (bool shift : {false, true}) {
    synth::SynthConfig cfg;
    cfg.env_shift_mode = shift;
    cfg.seed = shift ? 2 : 1;
    auto ds = synth::generate(cfg).dataset;
    auto stats = fit_stats(ds);
    Matrix z(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(stats.layout().total()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const Vector x = ds.stacked(i);
      z.row(static_cast<Eigen::Index>(i)) = stats.normalize(x).transpose();
      worst_round = std::max(worst_round, (stats.denormalize(stats.normalize(x)) - x).cwiseAbs().maxCoeff());
    }
    const double n = static_cast<double>(z.rows());
    for (Eigen::Index d = 0; d < z.cols(); ++d) {
      const double m = z.col(d).mean();
      const double sd = std::sqrt((z.col(d).array() - m).square().sum() / (n - 1.0));
      worst_mean = std::max(worst_mean, std::abs(m));
      worst_std = std::max(worst_std, std::abs(sd - 1.0));
    }
  }
  return {worst_mean < 1e-9 && worst_std < 1e-6 && worst_round < 1e-9,
          "max |mean| " + fmt(worst_mean) + ", max |std-1| " + fmt(worst_std) + ", round trip " + fmt(worst_round)};
}

Outcome cmaes_check() {
  cmaes::Config sphere;
  sphere.dim = 10;
  sphere.initial_mean = Vector::Constant(10, 1.0);
  sphere.seed = 1;
  sphere.max_generations = 3000;
  auto rs = cmaes::minimize([](const Vector& x) { return x.squaredNorm(); }, sphere);

  cmaes::Config rosen;
  rosen.dim = 5;
  rosen.initial_mean = Vector::Zero(5);
  rosen.seed = 2;
  rosen.max_generations = 5000;
  rosen.restart_on_stagnation = true;
  auto rr = cmaes::minimize(
      [](const Vector& x) {
        double f = 0.0;
        for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
          f += 100.0 * std::pow(x(i + 1) - x(i) * x(i), 2) + std::pow(1.0 - x(i), 2);
        return f;
      },
      rosen);

  Vector target(5);
  target << 1.5, -0.5, 0.25, 2.0, -1.0;
  cmaes::Config quad;
  quad.dim = 5;
  quad.initial_mean = Vector::Zero(5);
  quad.seed = 3;
  auto rq = cmaes::maximize([&](const Vector& x) { return 1.0 - (x - target).squaredNorm(); }, quad);
  const double arg_err = (rq.best_point - target).cwiseAbs().maxCoeff();

  return {rs.best_fitness < 1e-8 && rr.best_fitness < 1e-4 && arg_err < 1e-4,
          "sphere " + fmt(rs.best_fitness) + ", rosenbrock " + fmt(rr.best_fitness) + " (" +
              std::to_string(rr.restarts) + " restart), argmax err " + fmt(arg_err)};
}

Outcome bias_removal(const fs::path& root) {
  double worst_adv = 0.0, least_raw = INFINITY;
  for (std::string seed : {"1", "2", "3"}) {
    const auto dir = pipeline(root / ("seed" + seed),
                              {"--drivers", "2", "--trips", "500", "--identical-drivers", "--env-shift"}, seed);
    auto ds = load_dataset(dir / "data/data.csv", DatasetSchema::load(dir / "data/schema.json"));
    const auto stats = NormalizationStats::load(dir / "bundle/stats.json");
    const auto m = ds.schema().metric_index();
    std::map<std::string, double> raw;
    for (const auto& id : ds.driver_ids()) {
      double sum = 0.0;
      for (auto i : ds.driver_indices(id)) sum += ds[i].performance(static_cast<Eigen::Index>(m));
      raw[id] = sum / static_cast<double>(ds.driver_indices(id).size());
    }
    const auto ids = ds.driver_ids();
    if (ids.size() != 2) throw std::runtime_error("expected two drivers");
    const double raw_gap = std::abs(raw[ids[0]] - raw[ids[1]]) / stats.performance_std(m);
    auto adv = read_ranking(dir / "rank/ranking.csv");
    least_raw = std::min(least_raw, raw_gap);
    worst_adv = std::max(worst_adv, std::abs(adv.at(ids[0]) - adv.at(ids[1])));
  }
  return {least_raw > 0.5 && worst_adv < 0.1,
          "raw gap >= " + fmt(least_raw) + ", advantage gap <= " + fmt(worst_adv) + " (normalized, 3 seeds)"};
}

Outcome ranking_recovery(const fs::path& root) {
  double worst = 1.0;
  std::string all;
  for (std::string seed : {"7", "8", "9"}) {
    const auto dir = pipeline(root / ("seed" + seed),
                              {"--drivers", "20", "--trips", "100", "--skill-spacing", "0.25", "--noise", "0.05"},
                              seed);
    const auto truth = synth::GroundTruth::load(dir / "data/groundtruth.json");
    const auto adv = read_ranking(dir / "rank/ranking.csv");
    std::vector<double> est, skill;
    for (std::size_t k = 0; k < truth.driver_ids.size(); ++k) {
      est.push_back(adv.at(truth.driver_ids[k]));
      skill.push_back(truth.driver_skills(static_cast<Eigen::Index>(k)));
    }
    const double rho = oracle::spearman(est, skill);
    worst = std::min(worst, rho);
    all += (all.empty() ? "" : ", ") + fmt(rho);
  }
  return {worst >= 0.95, "spearman " + all};
}

Outcome placement(const fs::path& root) {
  int hits = 0;
  const std::string zeros = "[0,0,0,0,0,0,0,0]";
  for (int run = 1; run <= 20; ++run) {
    const std::string seed = std::to_string(run);
    const auto dir = root / ("run" + seed);
    cli({"synth", "--drivers", "8", "--trips", "150", "--skill-spacing", "0.01", "--behavior-gain", "0.3", "--seed",
         seed, "--out", (dir / "data").string()});
    cli({"train", "--data", (dir / "data/data.csv").string(), "--schema", (dir / "data/schema.json").string(),
         "--bundle", (dir / "bundle").string(), "--seed", seed});
    cli({"place", "--bundle", (dir / "bundle").string(), "--data", (dir / "data/data.csv").string(), "--env", zeros,
         "--env-normalized", "--seed", seed, "--out", (dir / "place.json").string()});
    const auto truth = synth::GroundTruth::load(dir / "data/groundtruth.json");
    if (io::read_json(dir / "place.json")["matched_driver"] == truth.optimum_driver) ++hits;
  }

  // Two free dimensions against an exhaustive 201 x 201 grid.
  const auto dir = root / "run1";
  cli({"place", "--bundle", (dir / "bundle").string(), "--data", (dir / "data/data.csv").string(), "--env", zeros,
       "--env-normalized", "--fix-template", "[null,null,0,0,0,0]", "--free", "beh_00,beh_01", "--seed", "1",
       "--out", (dir / "place_2d.json").string()});
  const auto bundle = ModelBundle::load(dir / "bundle");
  const auto box = behavior_search_box(bundle.behavior_min, bundle.behavior_max);
  const Vector s = Vector::Zero(8);
  const int res = 201;
  auto grid = oracle::grid_maximum(
      [&](double x, double y) {
        Vector a = Vector::Zero(6);
        a(0) = x;
        a(1) = y;
        return bundle.model.advantage_normalized(s, a);
      },
      box.lower(0), box.upper(0), box.lower(1), box.upper(1), res);
  const auto found = io::read_json(dir / "place_2d.json")["optimal_behavior"]["normalized"];
  const double cell0 = (box.upper(0) - box.lower(0)) / (res - 1);
  const double cell1 = (box.upper(1) - box.lower(1)) / (res - 1);
  const double d0 = std::abs(found[0].get<double>() - grid.x) / cell0;
  const double d1 = std::abs(found[1].get<double>() - grid.y) / cell1;
  const bool grid_ok = d0 <= 1.0 && d1 <= 1.0;
  return {hits >= 18 && grid_ok, std::to_string(hits) + "/20 matched the optimum driver; 2-d optimum off the grid "
                                     "argmax by (" + fmt(d0, 2) + ", " + fmt(d1, 2) + ") cells"};
}

Outcome wiring(const fs::path& root) {
  const auto bundle = ModelBundle::load(root / "ranking/seed7/bundle");
  const auto& model = bundle.model;
  const auto& l = model.stats().layout();
  const auto m = static_cast<Eigen::Index>(model.metric_index());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  auto draw = [&](std::size_t dim) {
    Vector v(static_cast<Eigen::Index>(dim));
    for (auto& x : v) x = n(rng);
    return v;
  };
  int exact = 0, close = 0;
  double worst_ulps = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vector s = draw(l.env_dim), a1 = draw(l.behavior_dim), a2 = draw(l.behavior_dim);
    const double lhs = model.advantage_normalized(s, a1) - model.advantage_normalized(s, a2);
    const double q1 = model.behavior().value_normalized(s, a1)(m);
    const double q2 = model.behavior().value_normalized(s, a2)(m);
    const double v = model.baseline().value_normalized(s)(m);
    if (lhs == (q1 - v) - (q2 - v)) ++exact;
    const double ulps = std::abs(lhs - (q1 - q2)) / (std::numeric_limits<double>::epsilon() *
                                                     std::max({std::abs(q1), std::abs(q2), std::abs(v)}));
    worst_ulps = std::max(worst_ulps, ulps);
    if (ulps <= 4.0) ++close;
  }
  return {exact == 1000 && close == 1000, std::to_string(exact) + "/1000 bitwise equal to (Q1-V)-(Q2-V); Q1-Q2 within " +
                                              fmt(worst_ulps, 3) + " ulp"};
}

Outcome wide_schema(const fs::path& root) {
  const fs::path fixtures = DRIVADV_FIXTURES;
  cli({"synth", "--drivers", "6", "--trips", "60", "--env-dims", "29", "--behavior-dims", "62", "--behavior-names",
       ",,,overspeedtime,,overspeedmax", "--seed", "4", "--out", (root / "data").string()});
  cli({"train", "--data", (root / "data/data.csv").string(), "--schema", (root / "data/schema.json").string(),
       "--bundle", (root / "bundle").string(), "--epochs", "10"});
  cli({"place", "--bundle", (root / "bundle").string(), "--data", (root / "data/data.csv").string(), "--env",
       (fixtures / "placement_env.json").string(), "--env-normalized", "--fix-template",
       (fixtures / "placement_template.json").string(), "--free", "overspeedtime,overspeedmax", "--out",
       (root / "place.json").string()});
  const auto j = io::read_json(root / "place.json");
  const auto a0 = io::read_json(fixtures / "placement_template.json");
  const auto& found = j["optimal_behavior"]["normalized"];
  bool fixed_kept = found.size() == 62 && j["env"]["normalized"].size() == 29;
  for (std::size_t i = 0; fixed_kept && i < 62; ++i)
    if (!a0[i].is_null() && found[i].get<double>() != a0[i].get<double>()) fixed_kept = false;
  return {fixed_kept, "D_s=29, D_a=62, optimum at overspeedtime " + fmt(found[3].get<double>()) + ", overspeedmax " +
                          fmt(found[5].get<double>()) + " (normalized), matched " +
                          j["matched_driver"].get<std::string>()};
}

// Every non-manifest file under a and b, compared byte for byte.
Outcome determinism(const fs::path& first, const fs::path& second) {
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& e : fs::recursive_directory_iterator(first)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.ends_with(".manifest.json")) continue;
    const auto rel = fs::relative(e.path(), first);
    ++compared;
    if (!fs::exists(second / rel) || io::read_text(e.path()) != io::read_text(second / rel))
      differing.push_back(rel.string());
  }
  std::string detail = std::to_string(compared) + " files compared";
  if (!differing.empty()) detail += ", differing: " + differing.front() + (differing.size() > 1 ? " ..." : "");
  return {compared > 0 && differing.empty(), detail};
}

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <work-dir>\n";
    return 2;
  }
  g_work = argv[1];
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 30, gradient_check},
      {2, "normalization", 5, normalization_check},
      {3, "CMA-ES benchmarks", 60, cmaes_check},
      {4, "environment-bias removal", 300, [] { return bias_removal(g_work / "bias"); }},
      {5, "ranking recovery", 900, [] { return ranking_recovery(g_work / "ranking"); }},
      {6, "optimal placement", 600, [] { return placement(g_work / "placement"); }},
      {7, "advantage wiring", 10, [] { return wiring(g_work); }},
      {8, "wide schema placement", 300, [] { return wide_schema(g_work / "wide_schema"); }},
      {9, "determinism", 1800,
       [] {
         const auto again = g_work / "rerun";
         bias_removal(again / "bias");
         ranking_recovery(again / "ranking");
         placement(again / "placement");
         const auto a = determinism(g_work / "bias", again / "bias");
         const auto b = determinism(g_work / "ranking", again / "ranking");
         const auto c = determinism(g_work / "placement", again / "placement");
         return Outcome{a.pass && b.pass && c.pass, "bias: " + a.detail + "; ranking: " + b.detail +
                                                        "; placement: " + c.detail};
       }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.limit_seconds) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.limit_seconds) + " s limit";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(secs, 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
