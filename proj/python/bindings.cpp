#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "drivadv/assessment.hpp"
#include "drivadv/cli.hpp"
#include "drivadv/cmaes.hpp"
#include "drivadv/errors.hpp"
#include "drivadv/placement.hpp"
#include "drivadv/synth.hpp"

namespace py = pybind11;
using namespace drivadv;

namespace {

// Stacks one block of every record into a rows-are-trips matrix.
Matrix block(const Dataset& ds, Vector TripRecord::*member) {
  if (ds.size() == 0) return {};
  Matrix m(static_cast<Eigen::Index>(ds.size()), (ds[0].*member).size());
  for (std::size_t i = 0; i < ds.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = (ds[i].*member).transpose();
  return m;
}

py::dict ranking_dict(const DriverAssessment& a) {
  py::dict d;
  d["driver_id"] = a.driver_id;
  d["mean_advantage"] = a.mean_advantage;
  d["std_advantage"] = a.std_advantage;
  d["trip_count"] = a.trip_count;
  return d;
}

}  // namespace

PYBIND11_MODULE(_drivadv, m) {
  m.doc() = "Environment-debiased driver assessment and placement";
  m.attr("__version__") = DRIVADV_VERSION;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", base.ptr());

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a drivadv subcommand; returns (exit_code, stdout, stderr).");

  py::class_<DatasetSchema>(m, "DatasetSchema")
      .def(py::init<>())
      .def_readwrite("env_columns", &DatasetSchema::env_columns)
      .def_readwrite("behavior_columns", &DatasetSchema::behavior_columns)
      .def_readwrite("performance_columns", &DatasetSchema::performance_columns)
      .def_readwrite("target_metric", &DatasetSchema::target_metric)
      .def("fingerprint", &DatasetSchema::fingerprint)
      .def_static("load", &DatasetSchema::load)
      .def("save", &DatasetSchema::save);

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_property_readonly("schema", &Dataset::schema)
      .def("driver_ids", &Dataset::driver_ids)
      .def_property_readonly("trip_ids",
                             [](const Dataset& ds) {
                               std::vector<std::string> ids;
                               for (const auto& r : ds.records()) ids.push_back(r.trip_id);
                               return ids;
                             })
      .def_property_readonly("trip_drivers",
                             [](const Dataset& ds) {
                               std::vector<std::string> ids;
                               for (const auto& r : ds.records()) ids.push_back(r.driver_id);
                               return ids;
                             })
      .def_property_readonly("env", [](const Dataset& ds) { return block(ds, &TripRecord::env); })
      .def_property_readonly("behavior", [](const Dataset& ds) { return block(ds, &TripRecord::behavior); })
      .def_property_readonly("performance", [](const Dataset& ds) { return block(ds, &TripRecord::performance); })
      .def("save", [](const Dataset& ds, const std::filesystem::path& p) { save_dataset(p, ds); });

  m.def(
      "load_dataset",
      [](const std::filesystem::path& csv, const DatasetSchema& schema, bool lenient) {
        return load_dataset(csv, schema, {lenient});
      },
      py::arg("csv"), py::arg("schema"), py::arg("lenient") = false);

  py::class_<synth::SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_drivers", &synth::SynthConfig::n_drivers)
      .def_readwrite("trips_per_driver", &synth::SynthConfig::trips_per_driver)
      .def_readwrite("d_env", &synth::SynthConfig::d_env)
      .def_readwrite("d_behavior", &synth::SynthConfig::d_behavior)
      .def_readwrite("skill_spacing", &synth::SynthConfig::skill_spacing)
      .def_readwrite("noise_sigma", &synth::SynthConfig::noise_sigma)
      .def_readwrite("env_shift_mode", &synth::SynthConfig::env_shift_mode)
      .def_readwrite("seed", &synth::SynthConfig::seed)
      .def_readwrite("identical_drivers", &synth::SynthConfig::identical_drivers)
      .def_readwrite("behavior_gain", &synth::SynthConfig::behavior_gain)
      .def_readwrite("center_radius", &synth::SynthConfig::center_radius)
      .def_readwrite("interaction", &synth::SynthConfig::interaction)
      .def_readwrite("behavior_names", &synth::SynthConfig::behavior_names);

  py::class_<synth::GroundTruth>(m, "GroundTruth")
      .def_readonly("driver_ids", &synth::GroundTruth::driver_ids)
      .def_readonly("driver_skills", &synth::GroundTruth::driver_skills)
      .def_readonly("optimum_behavior", &synth::GroundTruth::optimum_behavior)
      .def_readonly("optimum_driver", &synth::GroundTruth::optimum_driver)
      .def("env_effect", &synth::GroundTruth::env_effect)
      .def("behavior_effect", &synth::GroundTruth::behavior_effect)
      .def_static("load", &synth::GroundTruth::load);

  m.def("generate", [](const synth::SynthConfig& cfg) {
    auto out = synth::generate(cfg);
    return py::make_tuple(std::move(out.dataset), std::move(out.truth));
  });

  py::class_<ModelHyper>(m, "ModelHyper")
      .def(py::init<>())
      .def_readwrite("hidden_widths", &ModelHyper::hidden_widths)
      .def_readwrite("epochs", &ModelHyper::epochs)
      .def_readwrite("batch_size", &ModelHyper::batch_size)
      .def_readwrite("learning_rate", &ModelHyper::learning_rate)
      .def_readwrite("baseline_seed", &ModelHyper::baseline_seed)
      .def_readwrite("behavior_seed", &ModelHyper::behavior_seed);

  py::class_<ModelBundle>(m, "ModelBundle")
      .def_static("load", &ModelBundle::load)
      .def("save", &ModelBundle::save)
      .def_readonly("schema", &ModelBundle::schema)
      .def_readonly("behavior_min", &ModelBundle::behavior_min)
      .def_readonly("behavior_max", &ModelBundle::behavior_max)
      .def_property_readonly("baseline_losses", [](const ModelBundle& b) { return b.baseline_report.epoch_losses; })
      .def_property_readonly("behavior_losses", [](const ModelBundle& b) { return b.behavior_report.epoch_losses; })
      .def("baseline", [](const ModelBundle& b, const Vector& env) { return b.model.baseline().value_normalized(env); })
      .def("behavior",
           [](const ModelBundle& b, const Vector& env, const Vector& behavior) {
             return b.model.behavior().value_normalized(env, behavior);
           })
      .def("advantage",
           [](const ModelBundle& b, const Vector& env, const Vector& behavior) {
             return b.model.advantage_normalized(env, behavior);
           },
           "Normalized advantage on the target metric for normalized inputs.")
      .def("normalize_env", [](const ModelBundle& b, const Vector& s) { return b.model.stats().normalize_env(s); })
      .def("normalize_behavior",
           [](const ModelBundle& b, const Vector& a) { return b.model.stats().normalize_behavior(a); });

  m.def("train", &train_bundle, py::arg("dataset"), py::arg("hyper") = ModelHyper{});

  m.def(
      "rank",
      [](const ModelBundle& b, const Dataset& ds, bool raw_units, std::size_t min_trips) {
        auto advs = trip_advantages(ds, b.model.baseline(), b.model.metric_index(),
                                    raw_units ? AdvantageUnits::kRaw : AdvantageUnits::kNormalized);
        py::list out;
        for (const auto& e : assess_drivers(advs, min_trips).entries) out.append(ranking_dict(e));
        return out;
      },
      py::arg("bundle"), py::arg("dataset"), py::arg("raw_units") = false, py::arg("min_trips") = 10);

  m.def(
      "place",
      [](const ModelBundle& b, const Dataset& ds, const Vector& env, bool env_normalized, std::uint64_t seed,
         std::size_t runner_ups) {
        PlacementOptions opts;
        opts.search.box = behavior_search_box(b.behavior_min, b.behavior_max);
        opts.search.seed = seed;
        opts.runner_ups = runner_ups;
        auto r = place(b.model, build_profiles(ds, b.model.stats()), {env, env_normalized}, opts);
        return py::module_::import("json").attr("loads")(r.to_json(b.schema).dump());
      },
      py::arg("bundle"), py::arg("dataset"), py::arg("env"), py::arg("env_normalized") = false,
      py::arg("seed") = 0, py::arg("runner_ups") = 5);

  m.def(
      "cmaes_minimize",
      [](const std::function<double(const Vector&)>& f, const Vector& x0, double sigma, std::uint64_t seed,
         int max_generations) {
        cmaes::Config cfg;
        cfg.dim = static_cast<std::size_t>(x0.size());
        cfg.initial_mean = x0;
        cfg.initial_sigma = sigma;
        cfg.seed = seed;
        cfg.max_generations = max_generations;
        auto r = cmaes::minimize(f, cfg);
        return py::make_tuple(r.best_point, r.best_fitness, r.generations_used);
      },
      py::arg("objective"), py::arg("x0"), py::arg("sigma") = 0.3, py::arg("seed") = 0,
      py::arg("max_generations") = 1000);
}
