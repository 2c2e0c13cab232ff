#include "reem/baselines.hpp"
#include "reem/commands.hpp"
#include "reem/ensemble.hpp"
#include "reem/errors.hpp"
#include "reem/models.hpp"
#include "reem/pipeline.hpp"
#include "reem/simulator.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace reem;

namespace {

/// Copies into a fresh 1-D numpy array of the same element type.
template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
  return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

}  // namespace

PYBIND11_MODULE(_reem, m) {
  m.doc() = "Room temperature ensemble modelling: simulation, base models, ensembles and experiment pipeline";
  m.attr("__version__") = pipeline::kVersion;

  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PrerequisiteError>(m, "PrerequisiteError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<FittingError>(m, "FittingError", PyExc_RuntimeError);
  py::register_exception<SimulationBlowUp>(m, "SimulationBlowUp", PyExc_RuntimeError);

  m.def("format_iso8601", &format_iso8601, py::arg("t"));
  m.def("parse_iso8601", [](const std::string& s) { return parse_iso8601(s); }, py::arg("text"));

  // ---- simulator ----
  py::class_<sim::RoomProfile>(m, "RoomProfile")
      .def_readonly("id", &sim::RoomProfile::id)
      .def_readonly("seed", &sim::RoomProfile::seed)
      .def_property_readonly("mode", [](const sim::RoomProfile& p) { return sim::to_string(p.params.mode); })
      .def_property_readonly("orientation",
                             [](const sim::RoomProfile& p) { return sim::to_string(p.params.orientation); });

  m.def(
      "sample_room_profile",
      [](const std::string& id, std::uint64_t seed, const std::string& start) {
        return sim::sample_room_profile(id, seed, parse_iso8601(start));
      },
      py::arg("id"), py::arg("seed"), py::arg("start") = "2023-11-02T00:00");

  py::class_<sim::RoomDataset>(m, "RoomDataset")
      .def_readonly("room_id", &sim::RoomDataset::room_id)
      .def_readonly("sampling_minutes", &sim::RoomDataset::sampling_minutes)
      .def("__len__", &sim::RoomDataset::size)
      .def_property_readonly("timestamps", [](const sim::RoomDataset& d) { return to_array(d.timestamps); })
      .def_property_readonly("t_room", [](const sim::RoomDataset& d) { return to_array(d.t_room); })
      .def_property_readonly("u_hvac", [](const sim::RoomDataset& d) { return to_array(d.u_hvac); })
      .def_property_readonly("t_amb", [](const sim::RoomDataset& d) { return to_array(d.t_amb); })
      .def_property_readonly("occupancy", [](const sim::RoomDataset& d) { return to_array(d.occupancy); })
      .def_property_readonly("solar", [](const sim::RoomDataset& d) { return to_array(d.solar); })
      .def_property_readonly("day_type", [](const sim::RoomDataset& d) { return to_array(d.day_type); })
      .def("slice", &sim::RoomDataset::slice, py::arg("begin"), py::arg("end"))
      .def("to_csv", [](const sim::RoomDataset& d, const std::filesystem::path& p) { sim::write_dataset_csv(d, p); })
      .def_static("from_csv", &sim::read_dataset_csv, py::arg("path"), py::arg("room_id"));

  m.def(
      "generate_room_dataset",
      [](const sim::RoomProfile& profile, const std::string& start, int days, int sampling_minutes) {
        return sim::generate_room_dataset(profile, {parse_iso8601(start), days}, sampling_minutes);
      },
      py::arg("profile"), py::arg("start") = "2023-11-02T00:00", py::arg("days") = 90,
      py::arg("sampling_minutes") = 15);

  // ---- base models ----
  py::class_<models::BaseModel>(m, "BaseModel")
      .def_readonly("source_room", &models::BaseModel::source_room)
      .def_readonly("coefficients", &models::BaseModel::coefficients)
      .def_readonly("intercept", &models::BaseModel::intercept)
      .def_readonly("variable_count", &models::BaseModel::variable_count)
      .def_property_readonly("method", [](const models::BaseModel& b) { return std::string(models::method_name(b.method)); })
      .def_property_readonly("features", [](const models::BaseModel& b) { return b.spec.texts(); })
      .def(
          "predict",
          [](const models::BaseModel& b, const sim::RoomDataset& data, std::size_t t) {
            return models::model_predict(b, models::window_at(data, t, b.spec.lookback), data.u_hvac.at(t));
          },
          py::arg("data"), py::arg("t"), "One-step prediction of the temperature after row t.");

  m.def(
      "fit_mlr",
      [](const sim::RoomDataset& data, std::size_t lookback, double ridge) {
        return models::fit_least_squares(data, models::default_mlr_spec(lookback), ridge);
      },
      py::arg("data"), py::arg("lookback") = 8, py::arg("ridge") = models::kDefaultRidge);
  m.def(
      "fit_dictionary",
      [](const sim::RoomDataset& data, std::size_t lookback, std::size_t max_terms) {
        models::DictionaryFitOptions options;
        options.max_terms = max_terms;
        options.forced = {"u@0"};
        return models::fit_dictionary_regression(data, models::default_dictionary_spec(lookback), options);
      },
      py::arg("data"), py::arg("lookback") = 8, py::arg("max_terms") = 8);

  py::class_<models::ModelLibrary>(m, "ModelLibrary")
      .def(py::init<>())
      .def(py::init<std::vector<models::BaseModel>>())
      .def("__len__", &models::ModelLibrary::size)
      .def("__getitem__", [](const models::ModelLibrary& l, std::size_t i) { return l[i]; })
      .def("add", &models::ModelLibrary::add)
      .def("to_json", &models::ModelLibrary::to_json_string)
      .def_static("from_json", [](const std::string& s) { return models::ModelLibrary::from_json_string(s); })
      .def("save", &models::ModelLibrary::save)
      .def_static("load", &models::ModelLibrary::load);

  // ---- ensembles and metrics ----
  m.def(
      "combine", [](std::vector<double> p, std::vector<double> w) { return ensemble::combine(p, w); },
      py::arg("predictions"), py::arg("weights"));
  m.def(
      "heuristic_top_n",
      [](std::vector<double> errors, std::size_t n) { return baselines::heuristic_top_n(errors, n); },
      py::arg("errors"), py::arg("n"));
  m.def("improvement_percent", &ensemble::improvement_percent, py::arg("reference"), py::arg("method"));
  m.def(
      "compute_metrics",
      [](std::vector<double> yhat, std::vector<double> y) {
        const auto r = pipeline::compute_metrics(yhat, y);
        return py::make_tuple(r.mae, r.mse);
      },
      py::arg("predictions"), py::arg("truths"), "Returns (MAE, MSE).");

  // ---- experiment pipeline ----
  py::class_<pipeline::ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_static("parse", &pipeline::ExperimentConfig::parse, py::arg("text"))
      .def_static("load", &pipeline::ExperimentConfig::load, py::arg("path"))
      .def_readwrite("seed", &pipeline::ExperimentConfig::seed)
      .def_readwrite("out_dir", &pipeline::ExperimentConfig::out_dir)
      .def_readwrite("rooms", &pipeline::ExperimentConfig::rooms)
      .def_readwrite("days", &pipeline::ExperimentConfig::days)
      .def_property_readonly("train_rooms", &pipeline::ExperimentConfig::train_rooms)
      .def_property_readonly("test_rooms", &pipeline::ExperimentConfig::test_rooms)
      .def("validate", &pipeline::ExperimentConfig::validate);

  m.attr("COMMANDS") = cli::kCommands;
  m.def("run_command", &cli::run_command, py::arg("config"), py::arg("command"),
        py::call_guard<py::gil_scoped_release>());
}
