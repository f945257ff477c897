#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "predfilter/filter.hpp"
#include "predfilter/ingest.hpp"
#include "predfilter/train.hpp"

namespace predfilter {

/// Data reduction in percent: (1 - transmitted / total) * 100.
double data_reduction(std::size_t total, std::size_t transmitted);

/// Mean absolute difference of two equal-length, nonempty series.
double mae(std::span<const double> predictions, std::span<const double> truths);

struct Metrics {
  std::size_t total = 0;
  std::size_t transmitted = 0;
  std::size_t correct = 0;  // suppressed samples
  double reduction_pct = 0.0;
  /// Over steps that carry a prediction; absent when none do.
  std::optional<double> mae;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

Metrics metrics_from_log(const TransmissionLog& log);

/// Threshold-independent one-step MAE: every sample that has at least one
/// earlier sample in its gap-free run is forecast from the (padded) last k
/// actual readings. Returns nullopt when no sample qualifies.
std::optional<double> open_loop_mae(const SeriesFrame& series, const Predictor& model);

enum class ScenarioKind { same_site, cross_site, satellite_same_site, satellite_cross_site };

std::string_view to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(std::string_view s);

enum class ModelKind { lstm, persistence };

/// A slice of one data file.
struct DataRef {
  std::string source_id;
  SourceKind kind = SourceKind::in_situ;
  std::string file;  // relative to the data root
  std::optional<Timestamp> start;  // inclusive
  std::optional<Timestamp> end;    // exclusive
  std::string timestamp_column = "timestamp";
  std::string value_column = "value";

  friend bool operator==(const DataRef&, const DataRef&) = default;
};

struct ScenarioSpec {
  std::string label;
  ScenarioKind kind = ScenarioKind::same_site;
  DataRef train;
  DataRef test;
  /// Sampling period the model and filter run at; finer data is mean-resampled.
  std::int64_t resolution = 3600;
  std::vector<double> thresholds{0.5, 1.0};
  /// epsilon is taken from each threshold in turn.
  FilterConfig filter;
  TrainConfig train_cfg;
  ModelKind model = ModelKind::lstm;

  void validate() const;
};

nlohmann::json scenario_to_json(const ScenarioSpec& s);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

/// Parses a scenario file: {"scenarios": [ ... ]}. Every entry is validated.
std::vector<ScenarioSpec> load_scenarios(std::string_view contents);

struct ThresholdRow {
  double threshold = 0.0;
  Metrics metrics;
};

struct Provenance {
  std::string spec_sha256;
  std::string train_data_sha256;
  std::string test_data_sha256;
  std::string weights_sha256;  // "none" for the persistence model
  std::uint64_t seed = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ScenarioReport {
  ScenarioSpec spec;
  std::vector<ThresholdRow> rows;
  std::optional<double> mae;
  Provenance provenance;
  std::optional<TrainReport> train_report;
};

nlohmann::json report_to_json(const ScenarioReport& r);
ScenarioReport report_from_json(const nlohmann::json& j);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

struct RunOptions {
  std::string data_root = ".";
  /// Directory for cached weights; empty disables caching.
  std::string cache_dir;
  EpochCallback on_epoch;
};

/// Trains (or loads cached) weights on the training slice, then runs one
/// filter session per threshold on the test slice.
ScenarioReport run_scenario(const ScenarioSpec& spec, const RunOptions& opts);

struct ScenarioOutcome {
  std::optional<ScenarioReport> report;
  std::string error;  // set when report is absent
  int exit_code = 0;  // 2 input, 3 numerical
};

/// Runs every scenario on a bounded worker pool. Outcomes keep spec order;
/// a failing scenario does not stop the others.
std::vector<ScenarioOutcome> run_scenarios(const std::vector<ScenarioSpec>& specs,
                                           const RunOptions& opts, std::size_t jobs);

enum class TableFormat { markdown, csv };
TableFormat parse_table_format(std::string_view s);

/// Result table: Location (or Source, Target), MAE, then Total, Correct,
/// Transmitted and Reduction (%) per threshold. Reduction to 2 decimals,
/// MAE to 3, rounding half up. All reports must share one threshold list.
std::string render_table(std::span<const ScenarioReport> reports, TableFormat format);

}  // namespace predfilter
