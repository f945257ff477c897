#include "cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <ostream>
#include <thread>

#include "predfilter/error.hpp"
#include "predfilter/eval.hpp"
#include "predfilter/filter.hpp"
#include "predfilter/ingest.hpp"
#include "predfilter/model_io.hpp"
#include "predfilter/text.hpp"
#include "predfilter/train.hpp"

namespace predfilter::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct IngestArgs {
  std::string input;
  std::string schema;
  std::int64_t resample_to = 0;
  std::int64_t resolution = 0;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string config;
  std::uint64_t seed = 0;
  std::string out_weights;
  std::string out_report;
  std::size_t window = 24;
  std::int64_t resample_to = 0;
  std::string source_id = "unknown";
  std::string kind = "in_situ";
};

struct RunArgs {
  std::string data;
  std::string weights;
  bool persistence = false;
  double epsilon = 0.0;
  std::size_t k = 0;
  std::string policy = "reset_on_transmit";
  std::string sync = "synchronized";
  std::int64_t resample_to = 0;
  std::string out_log;
  std::string out_recon;
};

struct EvaluateArgs {
  std::string scenarios;
  std::string data_root = ".";
  std::string out;
  std::string cache_dir;
  std::size_t jobs = 0;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "markdown";
};

SeriesFrame load_series(const std::string& path, std::int64_t resample_to,
                        std::ostream& err) {
  auto parsed = parse_csv(path);
  err << parsed.report.summary() << "\n";
  if (resample_to > 0) return resample(parsed.frame, resample_to);
  return parsed.frame;
}

int cmd_ingest(const IngestArgs& a, std::ostream&, std::ostream& err) {
  if (!fs::exists(a.input)) throw InputError("input file not found: " + a.input);
  CsvSchema schema = a.schema.empty() ? CsvSchema{} : parse_schema_mapping(a.schema);
  schema.resolution = a.resolution;
  auto parsed = parse_csv(a.input, schema);
  if (!parsed.report.rejected_lines.empty()) {
    err << "rejected lines:";
    for (auto line : parsed.report.rejected_lines) err << ' ' << line;
    err << "\n";
  }
  SeriesFrame frame = std::move(parsed.frame);
  if (a.resample_to > 0) frame = resample(frame, a.resample_to);
  parsed.report.gaps = frame.gaps.size();
  err << parsed.report.summary() << "\n";
  text::write_file_atomic(a.out, to_csv(frame));
  return kOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  if (!a.config.empty()) {
    json doc;
    try {
      doc = json::parse(text::read_file(a.config));
    } catch (const json::exception& e) {
      throw InputError("config " + a.config + " is not valid JSON: " + e.what());
    }
    cfg = train_config_from_json(doc);
  }
  cfg.seed = a.seed;
  cfg.validate();

  CsvSchema schema;
  schema.source_id = a.source_id;
  schema.kind = parse_source_kind(a.kind);
  auto parsed = parse_csv(a.data, schema);
  err << parsed.report.summary() << "\n";
  SeriesFrame frame = std::move(parsed.frame);
  if (a.resample_to > 0) frame = resample(frame, a.resample_to);

  const NormStats norm = fit_norm(frame);
  const WindowSet windows = make_windows(frame, a.window, norm);
  auto [train_set, val_set] = chrono_split(windows, 1.0 - cfg.val_frac);
  out << "windows train=" << train_set.size() << " val=" << val_set.size()
      << " params=" << LstmParams::count_for(1, cfg.hidden) << "\n";

  const ModelMetadata meta{frame.source_id, frame.kind, cfg.seed};
  auto [weights, report] = train(train_set, val_set, cfg, meta, [&](const EpochRecord& e) {
    out << "epoch " << e.epoch << " train_mse=" << text::format_double(e.train_mse)
        << " val_mse=" << text::format_double(e.val_mse)
        << " lr=" << text::format_double(e.lr) << "\n";
  });
  out << "best_epoch=" << report.best_epoch
      << " best_val_mse=" << text::format_double(report.best_val_mse)
      << " stopped_epoch=" << report.stopped_epoch << "\n";
  save_weights(weights, a.out_weights);
  if (!a.out_report.empty()) {
    text::write_file_atomic(a.out_report, train_report_to_json(report).dump(1) + "\n");
  }
  return kOk;
}

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  if (a.persistence == !a.weights.empty()) {
    throw InputError("give exactly one of --weights or --persistence");
  }
  FilterConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.k = a.k;
  cfg.buffer_policy = parse_buffer_policy(a.policy);
  cfg.sync_mode = parse_sync_mode(a.sync);
  cfg.validate();

  std::unique_ptr<Predictor> model;
  if (a.persistence) {
    model = std::make_unique<PersistencePredictor>(cfg.k);
  } else {
    model = std::make_unique<LstmPredictor>(load_weights(a.weights));
  }
  check_compatible(*model, cfg);

  const SeriesFrame series = load_series(a.data, a.resample_to, err);
  const SessionResult session = run_session(series, *model, cfg);
  const Metrics m = metrics_from_log(session.log);
  if (!a.out_log.empty()) text::write_file_atomic(a.out_log, log_to_csv(session.log));
  if (!a.out_recon.empty()) {
    text::write_file_atomic(a.out_recon, reconstruction_to_csv(session.reconstruction));
  }
  out << "total=" << m.total << " transmitted=" << m.transmitted
      << " reduction=" << text::format_fixed(m.reduction_pct, 2) << "%"
      << " mae=" << (m.mae ? text::format_fixed(*m.mae, 3) : std::string("n/a")) << "\n";
  return kOk;
}

std::string report_filename(const ScenarioSpec& s, std::size_t index) {
  std::string name;
  for (char c : s.label) {
    name += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  }
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%03zu_", index);
  return prefix + name + ".json";
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const auto specs = load_scenarios(text::read_file(a.scenarios));
  RunOptions opts;
  opts.data_root = a.data_root;
  opts.cache_dir = a.cache_dir;
  const std::size_t jobs =
      a.jobs > 0 ? a.jobs : std::max(1u, std::thread::hardware_concurrency());
  const auto outcomes = run_scenarios(specs, opts, jobs);

  fs::create_directories(a.out);
  std::size_t failed = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (!o.report) {
      ++failed;
      err << "scenario '" << specs[i].label << "' failed: " << o.error << "\n";
      continue;
    }
    const fs::path path = fs::path(a.out) / report_filename(specs[i], i);
    text::write_file_atomic(path.string(), report_to_json(*o.report).dump(1) + "\n");
    out << "wrote " << path.string() << "\n";
  }
  out << "scenarios=" << specs.size() << " succeeded=" << specs.size() - failed
      << " failed=" << failed << "\n";
  return failed ? kPartialFailure : kOk;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
          found.push_back(entry.path().string());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  return files;
}

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  const TableFormat format = parse_table_format(a.format);
  std::vector<ScenarioReport> reports;
  for (const auto& file : expand_inputs(a.inputs)) {
    json doc;
    try {
      doc = json::parse(text::read_file(file));
    } catch (const json::exception& e) {
      throw InputError("report " + file + " is not valid JSON: " + e.what());
    }
    reports.push_back(report_from_json(doc));
  }
  out << render_table(reports, format);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Predictive data reduction for sensor streams"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* sc_ingest = app.add_subcommand("ingest", "Validate, canonicalize and resample a CSV");
  sc_ingest->add_option("--input", ingest.input, "Input CSV")->required();
  sc_ingest->add_option("--schema", ingest.schema, "Column mapping TIMESTAMP_COL:VALUE_COL");
  sc_ingest->add_option("--resample", ingest.resample_to, "Target resolution in seconds");
  sc_ingest->add_option("--resolution", ingest.resolution,
                        "Declared input resolution in seconds (default: inferred)");
  sc_ingest->add_option("--out", ingest.out, "Output CSV")->required();

  TrainArgs tr;
  auto* sc_train = app.add_subcommand("train", "Train the LSTM forecaster");
  sc_train->add_option("--data", tr.data, "Training CSV")->required();
  sc_train->add_option("--config", tr.config, "Training config JSON");
  sc_train->add_option("--seed", tr.seed, "RNG seed")->required();
  sc_train->add_option("--out-weights", tr.out_weights, "Weight file to write")->required();
  sc_train->add_option("--out-report", tr.out_report, "Training report JSON");
  sc_train->add_option("--window", tr.window, "Input window length")->check(CLI::PositiveNumber);
  sc_train->add_option("--resample", tr.resample_to, "Target resolution in seconds");
  sc_train->add_option("--source-id", tr.source_id, "Source identifier for metadata");
  sc_train->add_option("--kind", tr.kind, "in_situ or satellite");

  RunArgs ra;
  auto* sc_run = app.add_subcommand("run", "Run an edge/cloud filter session over a CSV");
  sc_run->add_option("--data", ra.data, "Series CSV")->required();
  sc_run->add_option("--weights", ra.weights, "Weight file");
  sc_run->add_flag("--persistence", ra.persistence, "Use the last-value predictor");
  sc_run->add_option("--epsilon", ra.epsilon, "Tolerance in °C")->required();
  sc_run->add_option("--k", ra.k, "Buffer size")->required();
  sc_run->add_option("--policy", ra.policy, "reset_on_transmit or sliding");
  sc_run->add_option("--sync", ra.sync, "synchronized or paper_faithful");
  sc_run->add_option("--resample", ra.resample_to, "Target resolution in seconds");
  sc_run->add_option("--out-log", ra.out_log, "Transmission log CSV");
  sc_run->add_option("--out-recon", ra.out_recon, "Reconstructed series CSV");

  EvaluateArgs ev;
  auto* sc_eval = app.add_subcommand("evaluate", "Run scenarios and write reports");
  sc_eval->add_option("--scenarios", ev.scenarios, "Scenario JSON file")->required();
  sc_eval->add_option("--data-root", ev.data_root, "Directory data files are relative to");
  sc_eval->add_option("--out", ev.out, "Directory for report JSON files")->required();
  sc_eval->add_option("--cache-dir", ev.cache_dir, "Directory for cached weights");
  sc_eval->add_option("--jobs", ev.jobs, "Worker threads (default: cores)");

  ReportArgs rp;
  auto* sc_report = app.add_subcommand("report", "Render reports as a table");
  sc_report->add_option("--in", rp.inputs, "Report files or directories")->required();
  sc_report->add_option("--format", rp.format, "markdown or csv");

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*sc_ingest) return cmd_ingest(ingest, out, err);
    if (*sc_train) return cmd_train(tr, out, err);
    if (*sc_run) return cmd_run(ra, out, err);
    if (*sc_eval) return cmd_evaluate(ev, out, err);
    if (*sc_report) return cmd_report(rp, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const SyncError& e) {
    err << "sync failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace predfilter::cli
