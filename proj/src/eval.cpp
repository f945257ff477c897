#include "predfilter/eval.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "predfilter/error.hpp"
#include "predfilter/model_io.hpp"
#include "predfilter/text.hpp"

namespace predfilter {

using nlohmann::json;

double data_reduction(std::size_t total, std::size_t transmitted) {
  if (total == 0) throw InputError("data reduction undefined for zero samples");
  if (transmitted > total) {
    throw InputError("transmitted count " + std::to_string(transmitted) +
                     " exceeds total " + std::to_string(total));
  }
  return (1.0 - static_cast<double>(transmitted) / static_cast<double>(total)) * 100.0;
}

double mae(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.empty() || predictions.size() != truths.size()) {
    throw InputError("MAE needs two nonempty series of equal length (got " +
                     std::to_string(predictions.size()) + " and " +
                     std::to_string(truths.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    sum += std::fabs(predictions[i] - truths[i]);
  }
  return sum / static_cast<double>(predictions.size());
}

Metrics metrics_from_log(const TransmissionLog& log) {
  Metrics m;
  m.total = log.total();
  m.transmitted = log.transmitted;
  m.correct = m.total - m.transmitted;
  m.reduction_pct = data_reduction(m.total, m.transmitted);
  std::vector<double> pred;
  std::vector<double> truth;
  for (const auto& s : log.steps) {
    if (!s.predicted) continue;
    pred.push_back(*s.predicted);
    truth.push_back(s.actual);
  }
  if (!pred.empty()) m.mae = mae(pred, truth);
  return m;
}

std::optional<double> open_loop_mae(const SeriesFrame& series, const Predictor& model) {
  const std::size_t k = model.window();
  std::vector<double> buffer;
  std::vector<double> pred;
  std::vector<double> truth;
  const auto& m = series.measurements;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i > 0 && m[i].timestamp - m[i - 1].timestamp != series.resolution) buffer.clear();
    if (!buffer.empty()) {
      pred.push_back(model.predict(pad_buffer(buffer, k)));
      truth.push_back(m[i].value);
    }
    buffer.push_back(m[i].value);
    if (buffer.size() > k) buffer.erase(buffer.begin());
  }
  if (pred.empty()) return std::nullopt;
  return mae(pred, truth);
}

std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::same_site: return "same_site";
    case ScenarioKind::cross_site: return "cross_site";
    case ScenarioKind::satellite_same_site: return "satellite_same_site";
    case ScenarioKind::satellite_cross_site: return "satellite_cross_site";
  }
  return "same_site";
}

ScenarioKind parse_scenario_kind(std::string_view s) {
  for (auto k : {ScenarioKind::same_site, ScenarioKind::cross_site,
                 ScenarioKind::satellite_same_site, ScenarioKind::satellite_cross_site}) {
    if (s == to_string(k)) return k;
  }
  throw InputError("unknown scenario kind '" + std::string(s) + "'");
}

namespace {

bool overlaps(const DataRef& a, const DataRef& b) {
  constexpr auto lo = std::numeric_limits<Timestamp>::min();
  constexpr auto hi = std::numeric_limits<Timestamp>::max();
  return a.start.value_or(lo) < b.end.value_or(hi) &&
         b.start.value_or(lo) < a.end.value_or(hi);
}

json ref_to_json(const DataRef& r) {
  json j{{"source_id", r.source_id},
         {"kind", std::string(to_string(r.kind))},
         {"file", r.file},
         {"timestamp_column", r.timestamp_column},
         {"value_column", r.value_column}};
  j["start"] = r.start ? json(text::format_iso8601(*r.start)) : json(nullptr);
  j["end"] = r.end ? json(text::format_iso8601(*r.end)) : json(nullptr);
  return j;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw InputError(what + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw InputError("unknown key '" + key + "' in " + what);
  }
}

std::optional<Timestamp> optional_time(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto s = j.at(key).get<std::string>();
  const auto t = text::parse_iso8601(s);
  if (!t) throw InputError("bad timestamp '" + s + "' for " + what + "." + key);
  return t;
}

DataRef ref_from_json(const json& j, const std::string& what) {
  reject_unknown(j, {"source_id", "kind", "file", "start", "end", "timestamp_column",
                     "value_column"},
                 what);
  DataRef r;
  if (!j.contains("file")) throw InputError(what + " is missing 'file'");
  r.file = j.at("file").get<std::string>();
  r.source_id = j.value("source_id", std::string("unknown"));
  r.kind = parse_source_kind(j.value("kind", std::string("in_situ")));
  r.timestamp_column = j.value("timestamp_column", r.timestamp_column);
  r.value_column = j.value("value_column", r.value_column);
  r.start = optional_time(j, "start", what);
  r.end = optional_time(j, "end", what);
  return r;
}

std::string threshold_label(double t) {
  std::string s = text::format_double(t);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string mae_cell(const std::optional<double>& v) {
  return v ? text::format_fixed(*v, 3) : std::string("n/a");
}

}  // namespace

void ScenarioSpec::validate() const {
  const std::string where = "scenario '" + label + "': ";
  if (thresholds.empty()) throw InputError(where + "thresholds list is empty");
  for (double t : thresholds) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw InputError(where + "thresholds must be finite and > 0");
    }
  }
  if (resolution <= 0) throw InputError(where + "resolution must be positive");
  if (filter.k == 0) throw InputError(where + "filter k must be at least 1");
  train_cfg.validate();
  const bool satellite = kind == ScenarioKind::satellite_same_site ||
                         kind == ScenarioKind::satellite_cross_site;
  const bool same_site = kind == ScenarioKind::same_site ||
                         kind == ScenarioKind::satellite_same_site;
  if (model == ModelKind::lstm &&
      (train.kind == SourceKind::satellite) != satellite) {
    throw InputError(where + "training source kind does not match scenario kind " +
                     std::string(to_string(kind)));
  }
  if (same_site != (train.source_id == test.source_id)) {
    throw InputError(where + (same_site ? "same-site scenario needs equal source ids"
                                        : "cross-site scenario needs distinct source ids"));
  }
  if (train.file == test.file && overlaps(train, test)) {
    throw InputError(where + "training and test ranges overlap on " + train.file);
  }
}

json scenario_to_json(const ScenarioSpec& s) {
  return json{
      {"label", s.label},
      {"kind", std::string(to_string(s.kind))},
      {"train", ref_to_json(s.train)},
      {"test", ref_to_json(s.test)},
      {"resolution", s.resolution},
      {"thresholds", s.thresholds},
      {"filter",
       {{"k", s.filter.k},
        {"buffer_policy", std::string(to_string(s.filter.buffer_policy))},
        {"sync_mode", std::string(to_string(s.filter.sync_mode))},
        {"pad_policy", std::string(to_string(s.filter.pad_policy))}}},
      {"train_config", train_config_to_json(s.train_cfg)},
      {"model", s.model == ModelKind::lstm ? "lstm" : "persistence"},
  };
}

ScenarioSpec scenario_from_json(const json& j) {
  reject_unknown(j, {"label", "kind", "train", "test", "resolution", "thresholds", "filter",
                     "train_config", "model"},
                 "scenario");
  ScenarioSpec s;
  try {
    s.label = j.value("label", std::string());
    s.kind = parse_scenario_kind(j.value("kind", std::string("same_site")));
    if (s.label.empty()) s.label = std::string(to_string(s.kind));
    if (!j.contains("train") || !j.contains("test")) {
      throw InputError("scenario '" + s.label + "' needs 'train' and 'test' entries");
    }
    s.train = ref_from_json(j.at("train"), s.label + ".train");
    s.test = ref_from_json(j.at("test"), s.label + ".test");
    s.resolution = j.value("resolution", s.resolution);
    if (j.contains("thresholds")) s.thresholds = j.at("thresholds").get<std::vector<double>>();
    if (j.contains("filter")) {
      const json& f = j.at("filter");
      reject_unknown(f, {"k", "buffer_policy", "sync_mode", "pad_policy"}, s.label + ".filter");
      s.filter.k = f.value("k", s.filter.k);
      s.filter.buffer_policy = parse_buffer_policy(
          f.value("buffer_policy", std::string(to_string(s.filter.buffer_policy))));
      s.filter.sync_mode =
          parse_sync_mode(f.value("sync_mode", std::string(to_string(s.filter.sync_mode))));
      s.filter.pad_policy =
          parse_pad_policy(f.value("pad_policy", std::string(to_string(s.filter.pad_policy))));
    }
    if (j.contains("train_config")) s.train_cfg = train_config_from_json(j.at("train_config"));
    const auto model = j.value("model", std::string("lstm"));
    if (model == "lstm") {
      s.model = ModelKind::lstm;
    } else if (model == "persistence") {
      s.model = ModelKind::persistence;
    } else {
      throw InputError("unknown model '" + model + "' (expected lstm or persistence)");
    }
  } catch (const json::exception& e) {
    throw InputError("malformed scenario: " + std::string(e.what()));
  }
  s.validate();
  return s;
}

std::vector<ScenarioSpec> load_scenarios(std::string_view contents) {
  json doc;
  try {
    doc = json::parse(contents);
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("scenarios") || !doc.at("scenarios").is_array()) {
    throw InputError("scenario file must be an object with a 'scenarios' array");
  }
  std::vector<ScenarioSpec> out;
  for (const auto& entry : doc.at("scenarios")) out.push_back(scenario_from_json(entry));
  if (out.empty()) throw InputError("scenario file lists no scenarios");
  return out;
}

namespace {

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> number_or_null(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

TrainReport train_report_from_json(const json& j) {
  TrainReport r;
  r.initial_val_mse = j.at("initial_val_mse").get<double>();
  for (const auto& e : j.at("epochs")) {
    r.epochs.push_back({e.at("epoch").get<std::size_t>(), e.at("train_mse").get<double>(),
                        e.at("val_mse").get<double>(), e.at("lr").get<double>()});
  }
  r.stopped_epoch = j.at("stopped_epoch").get<std::size_t>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.best_val_mse = j.at("best_val_mse").get<double>();
  r.final_lr = j.at("final_lr").get<double>();
  r.early_stopped = j.at("early_stopped").get<bool>();
  return r;
}

}  // namespace

json report_to_json(const ScenarioReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"threshold", row.threshold},
                    {"total", row.metrics.total},
                    {"correct", row.metrics.correct},
                    {"transmitted", row.metrics.transmitted},
                    {"reduction_pct", row.metrics.reduction_pct},
                    {"mae_in_loop", optional_number(row.metrics.mae)}});
  }
  json j{{"spec", scenario_to_json(r.spec)},
         {"rows", std::move(rows)},
         {"mae", optional_number(r.mae)},
         {"provenance",
          {{"spec_sha256", r.provenance.spec_sha256},
           {"train_data_sha256", r.provenance.train_data_sha256},
           {"test_data_sha256", r.provenance.test_data_sha256},
           {"weights_sha256", r.provenance.weights_sha256},
           {"seed", r.provenance.seed}}}};
  j["train_report"] = r.train_report ? train_report_to_json(*r.train_report) : json(nullptr);
  return j;
}

ScenarioReport report_from_json(const json& j) {
  ScenarioReport r;
  try {
    r.spec = scenario_from_json(j.at("spec"));
    for (const auto& row : j.at("rows")) {
      ThresholdRow t;
      t.threshold = row.at("threshold").get<double>();
      t.metrics.total = row.at("total").get<std::size_t>();
      t.metrics.correct = row.at("correct").get<std::size_t>();
      t.metrics.transmitted = row.at("transmitted").get<std::size_t>();
      t.metrics.reduction_pct = row.at("reduction_pct").get<double>();
      t.metrics.mae = number_or_null(row, "mae_in_loop");
      if (t.metrics.correct + t.metrics.transmitted != t.metrics.total) {
        throw InputError("report row violates correct + transmitted = total");
      }
      r.rows.push_back(t);
    }
    r.mae = number_or_null(j, "mae");
    const json& p = j.at("provenance");
    r.provenance = {p.at("spec_sha256").get<std::string>(),
                    p.at("train_data_sha256").get<std::string>(),
                    p.at("test_data_sha256").get<std::string>(),
                    p.at("weights_sha256").get<std::string>(), p.at("seed").get<std::uint64_t>()};
    if (j.contains("train_report") && !j.at("train_report").is_null()) {
      r.train_report = train_report_from_json(j.at("train_report"));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

namespace {

namespace fs = std::filesystem;

SeriesFrame load_ref(const DataRef& ref, std::string_view bytes, std::int64_t resolution) {
  CsvSchema schema;
  schema.timestamp_column = ref.timestamp_column;
  schema.value_column = ref.value_column;
  schema.source_id = ref.source_id;
  schema.kind = ref.kind;
  SeriesFrame frame = parse_csv_text(bytes, schema).frame;
  if (ref.start || ref.end) {
    frame = slice(frame, ref.start.value_or(std::numeric_limits<Timestamp>::min()),
                  ref.end.value_or(std::numeric_limits<Timestamp>::max()));
  }
  if (frame.empty()) throw InputError("no data in the selected range of " + ref.file);
  return resample(frame, resolution);
}

struct TrainedModel {
  ModelWeights weights;
  std::string weights_sha256;
  std::optional<TrainReport> report;
};

TrainedModel train_for(const ScenarioSpec& spec, const SeriesFrame& frame,
                       const std::string& train_sha, const RunOptions& opts) {
  std::string key;
  fs::path weights_path, meta_path;
  if (!opts.cache_dir.empty()) {
    const json key_doc{{"train_data_sha256", train_sha},
                       {"train", ref_to_json(spec.train)},
                       {"resolution", spec.resolution},
                       {"k", spec.filter.k},
                       {"train_config", train_config_to_json(spec.train_cfg)},
                       {"format_version", kWeightFormatVersion}};
    key = sha256_hex(key_doc.dump());
    weights_path = fs::path(opts.cache_dir) / (key + ".weights.json");
    meta_path = fs::path(opts.cache_dir) / (key + ".meta.json");
    if (fs::exists(weights_path) && fs::exists(meta_path)) {
      const std::string bytes = text::read_file(weights_path.string());
      const json meta = json::parse(text::read_file(meta_path.string()));
      const std::string sha = sha256_hex(bytes);
      if (meta.at("weights_sha256").get<std::string>() != sha) {
        throw InputError("cached weights " + weights_path.string() +
                         " fail hash verification");
      }
      return {deserialize_weights(bytes), sha, train_report_from_json(meta.at("train_report"))};
    }
  }

  const NormStats norm = fit_norm(frame);
  const WindowSet windows = make_windows(frame, spec.filter.k, norm);
  auto [train_set, val_set] = chrono_split(windows, 1.0 - spec.train_cfg.val_frac);
  ModelMetadata meta{spec.train.source_id, spec.train.kind, spec.train_cfg.seed};
  auto [weights, report] = train(train_set, val_set, spec.train_cfg, meta, opts.on_epoch);
  const std::string bytes = serialize_weights(weights);
  const std::string sha = sha256_hex(bytes);
  if (!opts.cache_dir.empty()) {
    fs::create_directories(opts.cache_dir);
    text::write_file_atomic(weights_path.string(), bytes);
    const json meta_doc{{"weights_sha256", sha}, {"train_report", train_report_to_json(report)}};
    text::write_file_atomic(meta_path.string(), meta_doc.dump(1) + "\n");
  }
  return {std::move(weights), sha, std::move(report)};
}

}  // namespace

ScenarioReport run_scenario(const ScenarioSpec& spec, const RunOptions& opts) {
  spec.validate();
  const fs::path root(opts.data_root);
  const std::string train_bytes = text::read_file((root / spec.train.file).string());
  const std::string test_bytes = text::read_file((root / spec.test.file).string());

  ScenarioReport report;
  report.spec = spec;
  report.provenance.spec_sha256 = sha256_hex(scenario_to_json(spec).dump());
  report.provenance.train_data_sha256 = sha256_hex(train_bytes);
  report.provenance.test_data_sha256 = sha256_hex(test_bytes);
  report.provenance.seed = spec.train_cfg.seed;

  std::unique_ptr<Predictor> model;
  if (spec.model == ModelKind::lstm) {
    const SeriesFrame train_frame = load_ref(spec.train, train_bytes, spec.resolution);
    TrainedModel trained =
        train_for(spec, train_frame, report.provenance.train_data_sha256, opts);
    report.provenance.weights_sha256 = trained.weights_sha256;
    report.train_report = std::move(trained.report);
    model = std::make_unique<LstmPredictor>(std::move(trained.weights));
  } else {
    report.provenance.weights_sha256 = "none";
    model = std::make_unique<PersistencePredictor>(spec.filter.k);
  }

  const SeriesFrame test_frame = load_ref(spec.test, test_bytes, spec.resolution);
  for (double threshold : spec.thresholds) {
    FilterConfig cfg = spec.filter;
    cfg.epsilon = threshold;
    const SessionResult session = run_session(test_frame, *model, cfg);
    report.rows.push_back({threshold, metrics_from_log(session.log)});
  }
  report.mae = open_loop_mae(test_frame, *model);
  return report;
}

std::vector<ScenarioOutcome> run_scenarios(const std::vector<ScenarioSpec>& specs,
                                           const RunOptions& opts, std::size_t jobs) {
  std::vector<ScenarioOutcome> outcomes(specs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      ScenarioOutcome& out = outcomes[i];
      try {
        out.report = run_scenario(specs[i], opts);
      } catch (const NumericalError& e) {
        out.error = e.what();
        out.exit_code = 3;
      } catch (const std::exception& e) {
        out.error = e.what();
        out.exit_code = 2;
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, specs.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(worker);
  }
  return outcomes;
}

TableFormat parse_table_format(std::string_view s) {
  if (s == "markdown" || s == "md") return TableFormat::markdown;
  if (s == "csv") return TableFormat::csv;
  throw InputError("unknown table format '" + std::string(s) + "' (expected markdown or csv)");
}

std::string render_table(std::span<const ScenarioReport> reports, TableFormat format) {
  if (reports.empty()) throw InputError("no reports to render");
  const auto& thresholds = reports.front().spec.thresholds;
  bool cross = false;
  for (const auto& r : reports) {
    if (r.spec.thresholds != thresholds || r.rows.size() != thresholds.size()) {
      throw InputError("reports use different threshold lists; render them separately");
    }
    cross = cross || r.spec.train.source_id != r.spec.test.source_id;
  }

  std::vector<std::string> header;
  if (cross) {
    header = {"Source", "Target"};
  } else {
    header = {"Location"};
  }
  header.push_back("MAE");
  for (double t : thresholds) {
    const std::string suffix = format == TableFormat::markdown
                                   ? " (" + threshold_label(t) + "°C)"
                                   : "_" + threshold_label(t);
    if (format == TableFormat::markdown) {
      for (const char* col : {"Total", "Correct", "Transmitted", "Reduction (%)"}) {
        header.push_back(col + suffix);
      }
    } else {
      for (const char* col : {"total", "correct", "transmitted", "reduction_pct"}) {
        header.push_back(col + suffix);
      }
    }
  }
  if (format == TableFormat::csv) {
    for (auto& h : header) {
      if (h == "Source" || h == "Target" || h == "Location" || h == "MAE") {
        for (auto& c : h) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
    }
  }

  std::vector<std::vector<std::string>> body;
  for (const auto& r : reports) {
    std::vector<std::string> row;
    if (cross) {
      row = {r.spec.train.source_id, r.spec.test.source_id};
    } else {
      row = {r.spec.test.source_id};
    }
    row.push_back(mae_cell(r.mae));
    for (const auto& tr : r.rows) {
      row.push_back(std::to_string(tr.metrics.total));
      row.push_back(std::to_string(tr.metrics.correct));
      row.push_back(std::to_string(tr.metrics.transmitted));
      row.push_back(text::format_fixed(tr.metrics.reduction_pct, 2));
    }
    body.push_back(std::move(row));
  }

  std::string out;
  const auto emit = [&](const std::vector<std::string>& cells) {
    if (format == TableFormat::markdown) {
      out += "|";
      for (const auto& c : cells) out += " " + c + " |";
    } else {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
    }
    out += '\n';
  };
  emit(header);
  if (format == TableFormat::markdown) {
    out += "|";
    for (std::size_t i = 0; i < header.size(); ++i) out += i < (cross ? 2u : 1u) ? " --- |" : " ---: |";
    out += '\n';
  }
  for (const auto& row : body) emit(row);
  return out;
}

}  // namespace predfilter
