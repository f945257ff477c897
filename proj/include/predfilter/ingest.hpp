#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace predfilter {

/// Unix seconds, UTC.
using Timestamp = std::int64_t;

enum class SourceKind { in_situ, satellite };

std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view s);

struct Measurement {
  Timestamp timestamp = 0;
  double value = 0.0;  // °C

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

/// Missing-step interval [start, end): every multiple of the resolution in
/// it is absent from the frame.
struct Gap {
  Timestamp start = 0;
  Timestamp end = 0;

  friend bool operator==(const Gap&, const Gap&) = default;
};

/// A regularly sampled univariate series. Timestamps are strictly increasing
/// and differ by exactly `resolution` except across `gaps`.
struct SeriesFrame {
  std::string source_id;
  SourceKind kind = SourceKind::in_situ;
  std::int64_t resolution = 0;  // seconds
  std::vector<Measurement> measurements;
  std::vector<Gap> gaps;

  std::size_t size() const noexcept { return measurements.size(); }
  bool empty() const noexcept { return measurements.empty(); }
  std::vector<double> values() const;

  friend bool operator==(const SeriesFrame&, const SeriesFrame&) = default;
};

/// Recomputes the gap list from timestamps. Throws InputError when the
/// timestamps are not increasing or not on the resolution grid.
std::vector<Gap> compute_gaps(std::span<const Measurement> m,
                              std::int64_t resolution);

/// Builds a frame from raw measurements (sorted, regular), filling in gaps.
SeriesFrame make_frame(std::string source_id, SourceKind kind,
                       std::int64_t resolution,
                       std::vector<Measurement> measurements);

struct CsvSchema {
  std::string timestamp_column = "timestamp";
  std::string value_column = "value";
  std::string source_id = "unknown";
  SourceKind kind = SourceKind::in_situ;
  /// 0 means infer from the smallest timestamp step.
  std::int64_t resolution = 0;
};

/// "timestamp_col:value_col" as used on the command line.
CsvSchema parse_schema_mapping(std::string_view mapping);

struct ParseReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t duplicates = 0;
  std::size_t gaps = 0;
  /// 1-based file line numbers of rejected rows.
  std::vector<std::size_t> rejected_lines;

  /// Single machine-readable line, e.g. "accepted=3 rejected=1 duplicates=0 gaps=0".
  std::string summary() const;
};

struct ParsedSeries {
  SeriesFrame frame;
  ParseReport report;
};

/// Parses a headered CSV. Rows with unparsable timestamps or non-finite
/// values are dropped and counted. Identical duplicate rows collapse;
/// duplicates with different values are an error.
ParsedSeries parse_csv(const std::string& path, const CsvSchema& schema = {});
ParsedSeries parse_csv_text(std::string_view contents,
                            const CsvSchema& schema = {});

/// Canonical "timestamp,value" CSV with ISO-8601 UTC stamps.
std::string to_csv(const SeriesFrame& frame);

/// Mean-downsamples to `target_resolution`, a whole multiple of the frame's.
/// Buckets are aligned to multiples of the target resolution; a bucket with
/// any missing input is dropped and becomes part of a gap.
SeriesFrame resample(const SeriesFrame& frame, std::int64_t target_resolution);

/// Measurements with start <= timestamp < end.
SeriesFrame slice(const SeriesFrame& frame, Timestamp start, Timestamp end);

struct NormStats {
  double mean = 0.0;
  double std = 1.0;

  double normalize(double v) const noexcept { return (v - mean) / std; }
  double denormalize(double z) const noexcept { return z * std + mean; }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Population mean and standard deviation. Throws on constant input.
NormStats fit_norm(const SeriesFrame& frame);
NormStats fit_norm(std::span<const double> values);

/// Supervised windows: each input is k consecutive normalized values with no
/// gap inside, and the target is the value at the next step.
struct WindowSet {
  std::size_t k = 0;
  NormStats norm;
  std::vector<double> inputs;  // size() * k, row-major
  std::vector<double> targets;
  std::vector<Timestamp> target_times;

  std::size_t size() const noexcept { return targets.size(); }
  bool empty() const noexcept { return targets.empty(); }
  std::span<const double> input(std::size_t i) const {
    return std::span<const double>(inputs).subspan(i * k, k);
  }
  /// Windows [first, first + count) as a new set.
  WindowSet subset(std::size_t first, std::size_t count) const;
};

WindowSet make_windows(const SeriesFrame& frame, std::size_t k,
                       const NormStats& stats);

/// First floor(train_frac * N) windows, then the rest. No shuffling.
std::pair<WindowSet, WindowSet> chrono_split(const WindowSet& set,
                                             double train_frac);

}  // namespace predfilter
