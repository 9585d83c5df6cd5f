#include "drivadv/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "drivadv/assessment.hpp"
#include "drivadv/errors.hpp"
#include "drivadv/io.hpp"
#include "drivadv/models.hpp"
#include "drivadv/placement.hpp"
#include "drivadv/synth.hpp"

#ifndef DRIVADV_VERSION
#define DRIVADV_VERSION "dev"
#endif

namespace drivadv::cli {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::json;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// A JSON file, or the JSON itself when the argument starts with '[' or '{'.
json json_argument(const fs::path& arg) {
  const auto text = arg.string();
  const auto first = text.find_first_not_of(" \t");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("malformed inline JSON '" + text + "': " + e.what());
    }
  }
  return io::read_json(arg);
}

Vector read_vector(const fs::path& path) {
  auto j = json_argument(path);
  if (j.is_object() && j.contains("values")) j = j.at("values");
  if (!j.is_array()) throw ConfigError("'" + path.string() + "' must hold a JSON array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("'" + path.string() + "' entry " + std::to_string(i) + " is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

// Template entries may be null at the searched dimensions.
Vector read_template(const fs::path& path, const std::vector<std::size_t>& free_dims) {
  auto j = json_argument(path);
  if (j.is_object() && j.contains("values")) j = j.at("values");
  if (!j.is_array()) throw ConfigError("'" + path.string() + "' must hold a JSON array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const bool is_free = std::find(free_dims.begin(), free_dims.end(), i) != free_dims.end();
    if (j[i].is_null()) {
      if (!is_free)
        throw ConfigError("template entry " + std::to_string(i) + " is null but not a free dimension");
      v(static_cast<Eigen::Index>(i)) = 0.0;
    } else if (j[i].is_number()) {
      v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    } else {
      throw ConfigError("template entry " + std::to_string(i) + " is neither a number nor null");
    }
  }
  return v;
}

std::vector<std::size_t> resolve_free_dims(const DatasetSchema& schema, const std::string& names) {
  std::vector<std::size_t> dims;
  for (const auto& n : split_list(names))
    if (!n.empty()) dims.push_back(schema.behavior_index(n));
  if (dims.empty()) throw ConfigError("--free needs at least one behavior column name");
  return dims;
}

std::string curve_csv(const TrainReport& r) {
  std::string out = "epoch,mse\n";
  for (std::size_t i = 0; i < r.epoch_losses.size(); ++i)
    out += std::to_string(i + 1) + "," + format_double(r.epoch_losses[i]) + "\n";
  return out;
}

class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> args)
      : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["arguments"] = std::move(args);
    j_["tool_version"] = DRIVADV_VERSION;
    j_["seeds"] = json::object();
    j_["inputs"] = json::object();
    j_["outputs"] = json::array();
  }
  void seed(const std::string& name, std::uint64_t v) { j_["seeds"][name] = v; }
  void input(const std::string& name, const fs::path& p) { j_["inputs"][name] = p.string(); }
  void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }
  void write(const fs::path& path) {
    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    j_["duration_seconds"] = elapsed.count();
    io::write_json(path, j_);
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

fs::path beside(const fs::path& file, const std::string& suffix) {
  fs::path p = file;
  p += suffix;
  return p;
}

struct SynthArgs {
  synth::SynthConfig cfg;
  std::string behavior_names;
  fs::path out;
};

struct TrainArgs {
  fs::path data, schema, bundle;
  int epochs = 100;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::string hidden = "64,64,64";
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> baseline_seed, behavior_seed;
  double validation_split = 0.0;
  bool lenient = false;
};

struct RankArgs {
  fs::path data, schema, bundle, out;
  bool raw_units = false;
  bool lenient = false;
  std::size_t min_trips = 10;
};

struct PlaceArgs {
  fs::path bundle, data, schema, env, templ, out, history;
  bool env_normalized = false;
  std::string free;
  std::uint64_t seed = 0;
  double sigma = 0.3;
  int generations = 500;
  std::size_t population = 0;
  std::size_t runner_ups = 5;
  double margin = 0.1;
  bool invert_match = false;
  bool lenient = false;
};

struct SurfaceArgs {
  fs::path bundle, env, templ, out;
  bool env_normalized = false;
  std::string free;
  std::size_t resolution = 50;
  double margin = 0.1;
};

DatasetSchema schema_for(const fs::path& schema_path, const ModelBundle& bundle) {
  if (schema_path.empty()) return bundle.schema;
  auto schema = DatasetSchema::load(schema_path);
  if (schema.fingerprint() != bundle.schema.fingerprint())
    throw ConfigError("schema '" + schema_path.string() + "' does not match the bundle's schema");
  return schema;
}

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("synth", argv);
  auto cfg = a.cfg;
  if (!a.behavior_names.empty()) cfg.behavior_names = split_list(a.behavior_names);
  auto result = synth::generate(cfg);
  fs::create_directories(a.out);
  save_dataset(a.out / "data.csv", result.dataset);
  result.dataset.schema().save(a.out / "schema.json");
  result.truth.save(a.out / "groundtruth.json");
  manifest.seed("synth", cfg.seed);
  for (const char* f : {"data.csv", "schema.json", "groundtruth.json"}) manifest.output(a.out / f);
  manifest.write(a.out / "synth.manifest.json");
  out << "wrote " << result.dataset.size() << " trips for " << cfg.n_drivers << " drivers to "
      << a.out.string() << "\n";
  return kOk;
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out,
              std::ostream& err) {
  Manifest manifest("train", argv);
  if (a.bundle.empty()) throw ConfigError("train needs --bundle");
  auto schema = DatasetSchema::load(a.schema);
  auto ds = load_dataset(a.data, schema, {a.lenient});
  for (const auto& w : ds.warnings()) err << "warning: " << w << "\n";

  ModelHyper hyper;
  hyper.hidden_widths.clear();
  for (const auto& w : split_list(a.hidden)) {
    try {
      hyper.hidden_widths.push_back(static_cast<std::size_t>(std::stoul(w)));
    } catch (const std::exception&) {
      throw ConfigError("--hidden expects comma-separated widths, got '" + a.hidden + "'");
    }
  }
  hyper.epochs = a.epochs;
  hyper.batch_size = a.batch;
  hyper.learning_rate = a.lr;
  hyper.baseline_seed = a.baseline_seed.value_or(a.seed);
  hyper.behavior_seed = a.behavior_seed.value_or(a.seed + 1);
  hyper.validation_fraction = a.validation_split;

  auto bundle = train_bundle(ds, hyper);
  bundle.save(a.bundle);
  io::write_text_atomic(a.bundle / "baseline_curve.csv", curve_csv(bundle.baseline_report));
  io::write_text_atomic(a.bundle / "behavior_curve.csv", curve_csv(bundle.behavior_report));

  manifest.input("data", a.data);
  manifest.input("schema", a.schema);
  manifest.seed("baseline", hyper.baseline_seed);
  manifest.seed("behavior", hyper.behavior_seed);
  for (const char* f : {"baseline.json", "behavior.json", "stats.json", "meta.json", "baseline_curve.csv",
                        "behavior_curve.csv"})
    manifest.output(a.bundle / f);
  manifest.write(a.bundle / "train.manifest.json");
  out << "trained on " << ds.size() << " trips: baseline mse " << bundle.baseline_report.final_loss
      << ", behavior mse " << bundle.behavior_report.final_loss << "\n";
  return kOk;
}

int cmd_rank(const RankArgs& a, const std::vector<std::string>& argv, std::ostream& out,
             std::ostream& err) {
  Manifest manifest("rank", argv);
  auto bundle = ModelBundle::load(a.bundle);
  auto schema = schema_for(a.schema, bundle);
  auto ds = load_dataset(a.data, schema, {a.lenient});
  for (const auto& w : ds.warnings()) err << "warning: " << w << "\n";

  auto advs = trip_advantages(ds, bundle.model.baseline(), bundle.model.metric_index(),
                              a.raw_units ? AdvantageUnits::kRaw : AdvantageUnits::kNormalized);
  auto ranking = assess_drivers(advs, a.min_trips);
  for (const auto& w : ranking.warnings) err << "warning: " << w << "\n";

  fs::create_directories(a.out);
  io::write_text_atomic(a.out / "ranking.txt", render_ranking(ranking));
  io::write_text_atomic(a.out / "ranking.csv", ranking_csv(ranking));
  std::string trips = "trip_id,driver_id,advantage\n";
  for (const auto& t : advs) trips += t.trip_id + "," + t.driver_id + "," + format_double(t.advantage) + "\n";
  io::write_text_atomic(a.out / "trip_advantages.csv", trips);

  manifest.input("data", a.data);
  manifest.input("bundle", a.bundle);
  for (const char* f : {"ranking.txt", "ranking.csv", "trip_advantages.csv"}) manifest.output(a.out / f);
  manifest.write(a.out / "rank.manifest.json");
  out << "ranked " << ranking.entries.size() << " drivers over " << advs.size() << " trips\n";
  return kOk;
}

BehaviorSearch search_setup(const ModelBundle& bundle, const fs::path& templ, const std::string& free,
                            double margin) {
  BehaviorSearch s;
  s.box = behavior_search_box(bundle.behavior_min, bundle.behavior_max, margin);
  if (!free.empty()) {
    s.free_dims = resolve_free_dims(bundle.schema, free);
    s.template_behavior = templ.empty()
                              ? Vector::Zero(static_cast<Eigen::Index>(bundle.schema.behavior_dim()))
                              : read_template(templ, s.free_dims);
  } else if (!templ.empty()) {
    throw ConfigError("--fix-template needs --free to name the searched dimensions");
  }
  return s;
}

int cmd_place(const PlaceArgs& a, const std::vector<std::string>& argv, std::ostream& out,
              std::ostream& err) {
  Manifest manifest("place", argv);
  auto bundle = ModelBundle::load(a.bundle);
  auto schema = schema_for(a.schema, bundle);
  auto ds = load_dataset(a.data, schema, {a.lenient});
  for (const auto& w : ds.warnings()) err << "warning: " << w << "\n";
  auto profiles = build_profiles(ds, bundle.model.stats());

  PlacementOptions opts;
  opts.search = search_setup(bundle, a.templ, a.free, a.margin);
  opts.search.initial_sigma = a.sigma;
  opts.search.max_generations = a.generations;
  opts.search.population = a.population;
  opts.search.seed = a.seed;
  opts.runner_ups = a.runner_ups;
  opts.invert_match = a.invert_match;

  EnvironmentInput env{read_vector(a.env), a.env_normalized};
  auto result = place(bundle.model, profiles, env, opts);

  auto j = result.to_json(schema);
  if (!a.free.empty()) j["free_dims"] = split_list(a.free);
  io::write_json(a.out, j);
  manifest.input("bundle", a.bundle);
  manifest.input("data", a.data);
  manifest.input("env", a.env);
  if (!a.templ.empty()) manifest.input("template", a.templ);
  manifest.seed("cmaes", a.seed);
  manifest.output(a.out);
  if (!a.history.empty()) {
    std::string h = "generation,best_advantage\n";
    for (std::size_t g = 0; g < result.search.history.size(); ++g)
      h += std::to_string(g + 1) + "," + format_double(result.search.history[g]) + "\n";
    io::write_text_atomic(a.history, h);
    manifest.output(a.history);
  }
  manifest.write(beside(a.out, ".manifest.json"));
  out << "matched driver: " << result.matched_driver << " (distance " << result.match_distance
      << ", advantage " << result.optimal_advantage << ")\n";
  return kOk;
}

int cmd_surface(const SurfaceArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("surface", argv);
  if (a.resolution < 2) throw ConfigError("--resolution must be at least 2");
  auto bundle = ModelBundle::load(a.bundle);
  auto search = search_setup(bundle, a.templ, a.free, a.margin);
  if (search.free_dims.size() != 2) throw ConfigError("--free must name exactly two behavior columns");

  const auto& stats = bundle.model.stats();
  Vector env = read_vector(a.env);
  if (!a.env_normalized) env = stats.normalize_env(env);
  if (static_cast<std::size_t>(env.size()) != stats.layout().env_dim)
    throw DimensionMismatch("env vector", stats.layout().env_dim, env.size());

  const auto d0 = static_cast<Eigen::Index>(search.free_dims[0]);
  const auto d1 = static_cast<Eigen::Index>(search.free_dims[1]);
  const auto& names = bundle.schema.behavior_columns;
  std::string csv = names[search.free_dims[0]] + "," + names[search.free_dims[1]] + ",advantage\n";
  Vector behavior = *search.template_behavior;
  const double steps = static_cast<double>(a.resolution - 1);
  for (std::size_t i = 0; i < a.resolution; ++i) {
    const double x = search.box.lower(d0) + (search.box.upper(d0) - search.box.lower(d0)) * i / steps;
    for (std::size_t k = 0; k < a.resolution; ++k) {
      const double y = search.box.lower(d1) + (search.box.upper(d1) - search.box.lower(d1)) * k / steps;
      behavior(d0) = x;
      behavior(d1) = y;
      csv += format_double(x) + "," + format_double(y) + "," +
             format_double(bundle.model.advantage_normalized(env, behavior)) + "\n";
    }
  }
  io::write_text_atomic(a.out, csv);
  manifest.input("bundle", a.bundle);
  manifest.input("env", a.env);
  if (!a.templ.empty()) manifest.input("template", a.templ);
  manifest.output(a.out);
  manifest.write(beside(a.out, ".manifest.json"));
  out << "wrote " << a.resolution * a.resolution << " grid points to " << a.out.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Environment-independent driver assessment and placement"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic trip dataset with ground truth");
  synth_cmd->add_option("--drivers", sa.cfg.n_drivers, "Number of drivers")->capture_default_str();
  synth_cmd->add_option("--trips", sa.cfg.trips_per_driver, "Trips per driver")->capture_default_str();
  synth_cmd->add_option("--env-dims", sa.cfg.d_env)->capture_default_str();
  synth_cmd->add_option("--behavior-dims", sa.cfg.d_behavior)->capture_default_str();
  synth_cmd->add_option("--skill-spacing", sa.cfg.skill_spacing)->capture_default_str();
  synth_cmd->add_option("--noise", sa.cfg.noise_sigma)->capture_default_str();
  synth_cmd->add_flag("--env-shift", sa.cfg.env_shift_mode, "Odd drivers get harder environments");
  synth_cmd->add_flag("--identical-drivers", sa.cfg.identical_drivers,
                      "Equal skill and behavior center for every driver");
  synth_cmd->add_option("--behavior-gain", sa.cfg.behavior_gain)->capture_default_str();
  synth_cmd->add_option("--center-radius", sa.cfg.center_radius)->capture_default_str();
  synth_cmd->add_option("--interaction", sa.cfg.interaction)->capture_default_str();
  synth_cmd->add_option("--behavior-names", sa.behavior_names,
                        "Comma-separated behavior column names; empty entries keep defaults");
  synth_cmd->add_option("--seed", sa.cfg.seed)->capture_default_str();
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Fit normalization and train both networks");
  train_cmd->add_option("--data", ta.data)->required();
  train_cmd->add_option("--schema", ta.schema)->required();
  train_cmd->add_option("--bundle", ta.bundle, "Output bundle directory");
  train_cmd->add_option("--out", ta.bundle, "Alias for --bundle");
  train_cmd->add_option("--epochs", ta.epochs)->capture_default_str();
  train_cmd->add_option("--batch", ta.batch)->capture_default_str();
  train_cmd->add_option("--lr", ta.lr)->capture_default_str();
  train_cmd->add_option("--hidden", ta.hidden)->capture_default_str();
  train_cmd->add_option("--seed", ta.seed, "Baseline seed; the behavior net uses seed + 1")->capture_default_str();
  train_cmd->add_option("--baseline-seed", ta.baseline_seed);
  train_cmd->add_option("--behavior-seed", ta.behavior_seed);
  train_cmd->add_option("--validation-split", ta.validation_split)->capture_default_str();
  train_cmd->add_flag("--lenient", ta.lenient, "Skip unparsable rows");

  RankArgs ra;
  auto* rank_cmd = app.add_subcommand("rank", "Rank drivers by mean trip advantage");
  rank_cmd->add_option("--data", ra.data)->required();
  rank_cmd->add_option("--schema", ra.schema);
  rank_cmd->add_option("--bundle", ra.bundle)->required();
  rank_cmd->add_option("--out", ra.out, "Output directory")->required();
  rank_cmd->add_flag("--raw-units", ra.raw_units, "Report advantages in target-metric units");
  rank_cmd->add_flag("--lenient", ra.lenient);
  rank_cmd->add_option("--min-trips", ra.min_trips, "Warn below this trip count")->capture_default_str();

  PlaceArgs pa;
  auto* place_cmd = app.add_subcommand("place", "Find the best behavior for an environment and match a driver");
  place_cmd->add_option("--bundle", pa.bundle)->required();
  place_cmd->add_option("--data", pa.data, "Trips used to build driver profiles")->required();
  place_cmd->add_option("--schema", pa.schema);
  place_cmd->add_option("--env", pa.env, "JSON array with the environment vector")->required();
  place_cmd->add_flag("--env-normalized", pa.env_normalized);
  place_cmd->add_option("--fix-template", pa.templ, "JSON array of normalized behavior values");
  place_cmd->add_option("--free", pa.free, "Comma-separated behavior columns to search");
  place_cmd->add_option("--seed", pa.seed)->capture_default_str();
  place_cmd->add_option("--sigma", pa.sigma)->capture_default_str();
  place_cmd->add_option("--generations", pa.generations)->capture_default_str();
  place_cmd->add_option("--population", pa.population, "0 selects the default")->capture_default_str();
  place_cmd->add_option("--runner-ups", pa.runner_ups)->capture_default_str();
  place_cmd->add_option("--margin", pa.margin, "Search box widening")->capture_default_str();
  place_cmd->add_flag("--invert-match", pa.invert_match, "Pick the farthest driver instead");
  place_cmd->add_flag("--lenient", pa.lenient);
  place_cmd->add_option("--history", pa.history, "CSV of per-generation best advantage");
  place_cmd->add_option("--out", pa.out, "Output JSON file")->required();

  SurfaceArgs fa;
  auto* surface_cmd = app.add_subcommand("surface", "Evaluate the advantage on a 2-D behavior grid");
  surface_cmd->add_option("--bundle", fa.bundle)->required();
  surface_cmd->add_option("--env", fa.env)->required();
  surface_cmd->add_flag("--env-normalized", fa.env_normalized);
  surface_cmd->add_option("--template", fa.templ);
  surface_cmd->add_option("--fix-template", fa.templ, "Alias for --template");
  surface_cmd->add_option("--free", fa.free, "Two comma-separated behavior columns")->required();
  surface_cmd->add_option("--resolution", fa.resolution)->capture_default_str();
  surface_cmd->add_option("--margin", fa.margin)->capture_default_str();
  surface_cmd->add_option("--out", fa.out, "Output CSV file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*synth_cmd) return cmd_synth(sa, args, out);
    if (*train_cmd) return cmd_train(ta, args, out, err);
    if (*rank_cmd) return cmd_rank(ra, args, out, err);
    if (*place_cmd) return cmd_place(pa, args, out, err);
    if (*surface_cmd) return cmd_surface(fa, args, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace drivadv::cli
