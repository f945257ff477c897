#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "predfilter/error.hpp"
#include "predfilter/eval.hpp"
#include "predfilter/filter.hpp"
#include "predfilter/ingest.hpp"
#include "predfilter/model_io.hpp"
#include "predfilter/text.hpp"
#include "predfilter/train.hpp"

namespace py = pybind11;
using namespace predfilter;

namespace {

py::dict report_dict(const ParseReport& r) {
  py::dict d;
  d["accepted"] = r.accepted;
  d["rejected"] = r.rejected;
  d["duplicates"] = r.duplicates;
  d["gaps"] = r.gaps;
  d["rejected_lines"] = r.rejected_lines;
  d["summary"] = r.summary();
  return d;
}

std::unique_ptr<Predictor> make_predictor(const std::optional<ModelWeights>& w, std::size_t k) {
  if (w) return std::make_unique<LstmPredictor>(*w);
  return std::make_unique<PersistencePredictor>(k);
}

}  // namespace

PYBIND11_MODULE(_predfilter, m) {
  m.doc() = "Predictive data reduction for sensor streams";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<SyncError>(m, "SyncError", PyExc_RuntimeError);

  py::class_<SeriesFrame>(m, "SeriesFrame")
      .def_readonly("source_id", &SeriesFrame::source_id)
      .def_readonly("resolution", &SeriesFrame::resolution)
      .def_property_readonly("kind", [](const SeriesFrame& f) { return std::string(to_string(f.kind)); })
      .def_property_readonly("timestamps",
                             [](const SeriesFrame& f) {
                               std::vector<Timestamp> t;
                               for (const auto& x : f.measurements) t.push_back(x.timestamp);
                               return t;
                             })
      .def_property_readonly("values", &SeriesFrame::values)
      .def_property_readonly("gaps",
                             [](const SeriesFrame& f) {
                               std::vector<std::pair<Timestamp, Timestamp>> g;
                               for (const auto& x : f.gaps) g.emplace_back(x.start, x.end);
                               return g;
                             })
      .def("__len__", &SeriesFrame::size)
      .def("to_csv", [](const SeriesFrame& f) { return to_csv(f); });

  m.def(
      "make_frame",
      [](const std::vector<Timestamp>& timestamps, const std::vector<double>& values,
         std::int64_t resolution, const std::string& source_id, const std::string& kind) {
        if (timestamps.size() != values.size()) {
          throw InputError("timestamps and values differ in length");
        }
        std::vector<Measurement> ms;
        for (std::size_t i = 0; i < values.size(); ++i) ms.push_back({timestamps[i], values[i]});
        return make_frame(source_id, parse_source_kind(kind), resolution, std::move(ms));
      },
      py::arg("timestamps"), py::arg("values"), py::arg("resolution"),
      py::arg("source_id") = "unknown", py::arg("kind") = "in_situ");

  m.def(
      "parse_csv",
      [](const std::string& path, const std::string& timestamp_column,
         const std::string& value_column, std::int64_t resolution) {
        CsvSchema schema;
        schema.timestamp_column = timestamp_column;
        schema.value_column = value_column;
        schema.resolution = resolution;
        auto parsed = parse_csv(path, schema);
        return py::make_tuple(parsed.frame, report_dict(parsed.report));
      },
      py::arg("path"), py::arg("timestamp_column") = "timestamp",
      py::arg("value_column") = "value", py::arg("resolution") = 0);

  m.def("resample", &resample, py::arg("frame"), py::arg("target_resolution"));
  m.def(
      "fit_norm",
      [](const SeriesFrame& f) {
        const auto s = fit_norm(f);
        return py::make_tuple(s.mean, s.std);
      },
      py::arg("frame"));

  py::class_<ModelWeights>(m, "ModelWeights")
      .def_static("load", &load_weights, py::arg("path"))
      .def_static("from_json", [](const std::string& s) { return deserialize_weights(s); })
      .def("save", [](const ModelWeights& w, const std::string& path) { save_weights(w, path); })
      .def("to_json", [](const ModelWeights& w) { return serialize_weights(w); })
      .def("predict",
           [](const ModelWeights& w, const std::vector<double>& window) {
             return predict_celsius(window, w);
           },
           py::arg("window"), "Forecast in °C from a window of raw °C readings")
      .def_property_readonly("window", [](const ModelWeights& w) { return w.params.window(); })
      .def_property_readonly("hidden", [](const ModelWeights& w) { return w.params.hidden_size(); })
      .def_property_readonly("parameter_count",
                             [](const ModelWeights& w) { return w.params.parameter_count(); })
      .def_property_readonly("norm",
                             [](const ModelWeights& w) { return py::make_tuple(w.norm.mean, w.norm.std); })
      .def("__eq__", [](const ModelWeights& a, const ModelWeights& b) { return a == b; });

  m.def(
      "random_weights",
      [](std::size_t hidden, std::size_t window, std::uint64_t seed, double mean, double std) {
        return ModelWeights{init_params(hidden, 1, window, seed), NormStats{mean, std}, {}};
      },
      py::arg("hidden"), py::arg("window"), py::arg("seed"), py::arg("mean") = 0.0,
      py::arg("std") = 1.0);

  m.def(
      "train_model",
      [](const SeriesFrame& frame, std::size_t window, const std::string& config_json,
         std::uint64_t seed) {
        TrainConfig cfg = config_json.empty()
                              ? TrainConfig{}
                              : train_config_from_json(nlohmann::json::parse(config_json));
        cfg.seed = seed;
        cfg.validate();
        const NormStats norm = fit_norm(frame);
        const WindowSet windows = make_windows(frame, window, norm);
        auto [tr, val] = chrono_split(windows, 1.0 - cfg.val_frac);
        auto [weights, report] = [&] {
          py::gil_scoped_release release;
          return train(tr, val, cfg, {frame.source_id, frame.kind, seed});
        }();
        return py::make_tuple(weights, train_report_to_json(report).dump());
      },
      py::arg("frame"), py::arg("window"), py::arg("config_json") = "", py::arg("seed"));

  m.def(
      "run_session",
      [](const SeriesFrame& series, const std::optional<ModelWeights>& weights, double epsilon,
         std::size_t k, const std::string& policy, const std::string& sync) {
        FilterConfig cfg;
        cfg.epsilon = epsilon;
        cfg.k = k;
        cfg.buffer_policy = parse_buffer_policy(policy);
        cfg.sync_mode = parse_sync_mode(sync);
        const auto model = make_predictor(weights, k);
        const SessionResult r = run_session(series, *model, cfg);
        const Metrics mt = metrics_from_log(r.log);
        py::dict d;
        std::vector<std::string> decisions;
        std::vector<std::optional<double>> predicted;
        for (const auto& s : r.log.steps) {
          decisions.emplace_back(to_string(s.decision));
          predicted.push_back(s.predicted);
        }
        std::vector<double> recon;
        std::vector<bool> is_pred;
        for (const auto& p : r.reconstruction.points) {
          recon.push_back(p.value);
          is_pred.push_back(p.is_prediction);
        }
        d["total"] = mt.total;
        d["transmitted"] = mt.transmitted;
        d["suppressed"] = mt.correct;
        d["reduction_pct"] = mt.reduction_pct;
        d["mae"] = mt.mae;
        d["decisions"] = decisions;
        d["predicted"] = predicted;
        d["reconstructed"] = recon;
        d["is_prediction"] = is_pred;
        d["log_csv"] = log_to_csv(r.log);
        d["recon_csv"] = reconstruction_to_csv(r.reconstruction);
        return d;
      },
      py::arg("series"), py::arg("weights"), py::arg("epsilon"), py::arg("k"),
      py::arg("policy") = "reset_on_transmit", py::arg("sync") = "synchronized",
      "Edge/cloud session. Pass weights=None for the persistence predictor.");

  m.def("data_reduction", &data_reduction, py::arg("total"), py::arg("transmitted"));
  m.def(
      "mae",
      [](const std::vector<double>& p, const std::vector<double>& t) { return mae(p, t); },
      py::arg("predictions"), py::arg("truths"));

  m.def(
      "run_scenario",
      [](const std::string& spec_json, const std::string& data_root, const std::string& cache_dir) {
        const ScenarioSpec spec = scenario_from_json(nlohmann::json::parse(spec_json));
        RunOptions opts;
        opts.data_root = data_root;
        opts.cache_dir = cache_dir;
        ScenarioReport r;
        {
          py::gil_scoped_release release;
          r = run_scenario(spec, opts);
        }
        return report_to_json(r).dump();
      },
      py::arg("spec_json"), py::arg("data_root") = ".", py::arg("cache_dir") = "",
      "Runs one scenario; returns the report as a JSON string.");

  m.def(
      "render_table",
      [](const std::vector<std::string>& report_jsons, const std::string& format) {
        std::vector<ScenarioReport> reports;
        for (const auto& s : report_jsons) reports.push_back(report_from_json(nlohmann::json::parse(s)));
        return render_table(reports, parse_table_format(format));
      },
      py::arg("reports"), py::arg("format") = "markdown");
}
