#include "predfilter/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "predfilter/error.hpp"
#include "predfilter/text.hpp"

namespace predfilter {

std::string_view to_string(SourceKind kind) {
  return kind == SourceKind::satellite ? "satellite" : "in_situ";
}

SourceKind parse_source_kind(std::string_view s) {
  if (s == "in_situ") return SourceKind::in_situ;
  if (s == "satellite") return SourceKind::satellite;
  throw InputError("unknown source kind '" + std::string(s) +
                   "' (expected in_situ or satellite)");
}

std::vector<double> SeriesFrame::values() const {
  std::vector<double> out;
  out.reserve(measurements.size());
  for (const auto& m : measurements) out.push_back(m.value);
  return out;
}

std::vector<Gap> compute_gaps(std::span<const Measurement> m,
                              std::int64_t resolution) {
  if (resolution <= 0) throw InputError("resolution must be positive");
  std::vector<Gap> gaps;
  for (std::size_t i = 1; i < m.size(); ++i) {
    const Timestamp prev = m[i - 1].timestamp;
    const Timestamp cur = m[i].timestamp;
    const std::int64_t step = cur - prev;
    if (step <= 0) {
      throw InputError("timestamps not strictly increasing at " +
                       text::format_iso8601(cur));
    }
    if (step % resolution != 0) {
      throw InputError("timestamp " + text::format_iso8601(cur) +
                       " is off the " + std::to_string(resolution) +
                       " s sampling grid");
    }
    if (step > resolution) gaps.push_back({prev + resolution, cur});
  }
  return gaps;
}

SeriesFrame make_frame(std::string source_id, SourceKind kind,
                       std::int64_t resolution,
                       std::vector<Measurement> measurements) {
  SeriesFrame f;
  f.source_id = std::move(source_id);
  f.kind = kind;
  f.resolution = resolution;
  f.gaps = compute_gaps(measurements, resolution);
  f.measurements = std::move(measurements);
  return f;
}

CsvSchema parse_schema_mapping(std::string_view mapping) {
  CsvSchema schema;
  const auto colon = mapping.find(':');
  if (colon == std::string_view::npos || colon == 0 ||
      colon + 1 == mapping.size()) {
    throw InputError("schema must be 'timestamp_column:value_column', got '" +
                     std::string(mapping) + "'");
  }
  schema.timestamp_column = std::string(text::trim(mapping.substr(0, colon)));
  schema.value_column = std::string(text::trim(mapping.substr(colon + 1)));
  return schema;
}

std::string ParseReport::summary() const {
  std::ostringstream ss;
  ss << "accepted=" << accepted << " rejected=" << rejected
     << " duplicates=" << duplicates << " gaps=" << gaps;
  return ss.str();
}

namespace {

std::string list_lines(const std::vector<std::size_t>& lines) {
  constexpr std::size_t kMaxListed = 10;
  std::string out;
  for (std::size_t i = 0; i < lines.size() && i < kMaxListed; ++i) {
    if (i) out += ", ";
    out += std::to_string(lines[i]);
  }
  if (lines.size() > kMaxListed) out += ", ...";
  return out;
}

std::size_t column_index(const std::vector<std::string>& header,
                         const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (text::trim(header[i]) == name) return i;
  }
  throw InputError("CSV header has no column '" + name + "'");
}

}  // namespace

ParsedSeries parse_csv_text(std::string_view contents, const CsvSchema& schema) {
  struct Row {
    Measurement m;
    std::size_t line;
  };
  ParseReport report;
  std::vector<Row> rows;
  std::vector<std::string> header;
  std::size_t ts_col = 0, val_col = 0;
  bool have_header = false;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    const auto nl = contents.find('\n', pos);
    const auto line = text::trim(contents.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? contents.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    auto fields = text::split_csv_line(line);
    if (!have_header) {
      header = std::move(fields);
      ts_col = column_index(header, schema.timestamp_column);
      val_col = column_index(header, schema.value_column);
      have_header = true;
      continue;
    }
    const auto need = std::max(ts_col, val_col);
    std::optional<Timestamp> ts;
    std::optional<double> v;
    if (fields.size() > need) {
      ts = text::parse_iso8601(fields[ts_col]);
      v = text::parse_double(fields[val_col]);
    }
    if (!ts || !v || !std::isfinite(*v)) {
      ++report.rejected;
      report.rejected_lines.push_back(line_no);
      continue;
    }
    rows.push_back({{*ts, *v}, line_no});
  }
  if (!have_header) throw InputError("CSV input is empty (no header row)");
  if (rows.empty()) {
    std::string msg = "no valid rows";
    if (!report.rejected_lines.empty()) {
      msg += "; rejected lines: " + list_lines(report.rejected_lines);
    }
    throw InputError(msg);
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.m.timestamp < b.m.timestamp;
  });
  std::vector<Measurement> measurements;
  measurements.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].m.timestamp == rows[i - 1].m.timestamp) {
      if (rows[i].m.value != rows[i - 1].m.value) {
        throw InputError("conflicting duplicate timestamp " +
                         text::format_iso8601(rows[i].m.timestamp) +
                         " on lines " + std::to_string(rows[i - 1].line) +
                         " and " + std::to_string(rows[i].line));
      }
      ++report.duplicates;
      continue;
    }
    measurements.push_back(rows[i].m);
  }

  std::int64_t resolution = schema.resolution;
  if (resolution == 0) {
    if (measurements.size() < 2) {
      throw InputError(
          "cannot infer resolution from a single row; declare it explicitly");
    }
    resolution = measurements[1].timestamp - measurements[0].timestamp;
    for (std::size_t i = 2; i < measurements.size(); ++i) {
      resolution = std::min(
          resolution, measurements[i].timestamp - measurements[i - 1].timestamp);
    }
  }

  ParsedSeries out;
  out.frame = make_frame(schema.source_id, schema.kind, resolution,
                         std::move(measurements));
  report.accepted = out.frame.size();
  report.gaps = out.frame.gaps.size();
  out.report = std::move(report);
  return out;
}

ParsedSeries parse_csv(const std::string& path, const CsvSchema& schema) {
  return parse_csv_text(text::read_file(path), schema);
}

std::string to_csv(const SeriesFrame& frame) {
  std::string out = "timestamp,value\n";
  for (const auto& m : frame.measurements) {
    out += text::format_iso8601(m.timestamp);
    out += ',';
    out += text::format_double(m.value);
    out += '\n';
  }
  return out;
}

SeriesFrame resample(const SeriesFrame& frame, std::int64_t target_resolution) {
  if (frame.resolution <= 0) throw InputError("frame has no resolution");
  if (target_resolution < frame.resolution) {
    throw InputError("upsampling from " + std::to_string(frame.resolution) +
                     " s to " + std::to_string(target_resolution) +
                     " s is not supported");
  }
  if (target_resolution % frame.resolution != 0) {
    throw InputError("target resolution " + std::to_string(target_resolution) +
                     " s is not a multiple of " +
                     std::to_string(frame.resolution) + " s");
  }
  if (target_resolution == frame.resolution) return frame;

  const auto ratio =
      static_cast<std::size_t>(target_resolution / frame.resolution);
  const auto bucket_of = [&](Timestamp t) {
    Timestamp b = t / target_resolution;
    if (t % target_resolution < 0) --b;
    return b * target_resolution;
  };

  std::vector<Measurement> out;
  const auto& m = frame.measurements;
  std::size_t i = 0;
  while (i < m.size()) {
    const Timestamp bucket = bucket_of(m[i].timestamp);
    std::size_t j = i;
    double sum = 0.0;
    while (j < m.size() && bucket_of(m[j].timestamp) == bucket) {
      sum += m[j].value;
      ++j;
    }
    if (j - i == ratio) {
      out.push_back({bucket, sum / static_cast<double>(ratio)});
    }
    i = j;
  }
  return make_frame(frame.source_id, frame.kind, target_resolution,
                    std::move(out));
}

SeriesFrame slice(const SeriesFrame& frame, Timestamp start, Timestamp end) {
  std::vector<Measurement> kept;
  for (const auto& m : frame.measurements) {
    if (m.timestamp >= start && m.timestamp < end) kept.push_back(m);
  }
  return make_frame(frame.source_id, frame.kind, frame.resolution,
                    std::move(kept));
}

NormStats fit_norm(std::span<const double> values) {
  if (values.empty()) throw InputError("cannot fit normalization: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double std = std::sqrt(sq / static_cast<double>(values.size()));
  if (!(std > 0.0) || !std::isfinite(std)) {
    throw InputError("cannot fit normalization: constant series");
  }
  return {mean, std};
}

NormStats fit_norm(const SeriesFrame& frame) {
  const auto values = frame.values();
  return fit_norm(values);
}

WindowSet WindowSet::subset(std::size_t first, std::size_t count) const {
  WindowSet out;
  out.k = k;
  out.norm = norm;
  out.inputs.assign(inputs.begin() + static_cast<std::ptrdiff_t>(first * k),
                    inputs.begin() + static_cast<std::ptrdiff_t>((first + count) * k));
  out.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(first),
                     targets.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.target_times.assign(
      target_times.begin() + static_cast<std::ptrdiff_t>(first),
      target_times.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

WindowSet make_windows(const SeriesFrame& frame, std::size_t k,
                       const NormStats& stats) {
  if (k == 0) throw InputError("window length must be at least 1");
  WindowSet set;
  set.k = k;
  set.norm = stats;
  const auto& m = frame.measurements;
  // run = length of the gap-free run ending at i
  std::size_t run = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool contiguous =
        i > 0 && m[i].timestamp - m[i - 1].timestamp == frame.resolution;
    run = contiguous ? run + 1 : 1;
    if (run < k + 1) continue;
    for (std::size_t j = i - k; j < i; ++j) {
      set.inputs.push_back(stats.normalize(m[j].value));
    }
    set.targets.push_back(stats.normalize(m[i].value));
    set.target_times.push_back(m[i].timestamp);
  }
  if (set.empty()) {
    throw InputError("no gap-free run of " + std::to_string(k + 1) +
                     " samples; cannot build windows");
  }
  return set;
}

std::pair<WindowSet, WindowSet> chrono_split(const WindowSet& set,
                                             double train_frac) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw InputError("split fraction must lie in (0, 1)");
  }
  const auto n = set.size();
  const auto n_first =
      static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  if (n_first == 0 || n_first == n) {
    throw InputError("split of " + std::to_string(n) + " windows at " +
                     text::format_double(train_frac) + " leaves one side empty");
  }
  return {set.subset(0, n_first), set.subset(n_first, n - n_first)};
}

}  // namespace predfilter
